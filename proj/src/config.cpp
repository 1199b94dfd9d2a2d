#include "tcjepa/config.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace tcjepa {

namespace {

using Setter = std::function<void(RunConfig&, const std::string&)>;

long parse_long(const std::string& v) {
    size_t pos = 0;
    long x = std::stol(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
}

double parse_double(const std::string& v) {
    size_t pos = 0;
    double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
}

uint64_t parse_u64(const std::string& v) {
    size_t pos = 0;
    unsigned long long x = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return uint64_t(x);
}

std::vector<int> parse_int_list(const std::string& v) {
    std::vector<int> out;
    if (v.empty()) return out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ','))
        out.push_back(int(parse_long(item)));
    return out;
}

std::string int_list_str(const std::vector<int>& v) {
    std::string s;
    for (size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
}

#define SET_INT(field) [](RunConfig& c, const std::string& v) { c.field = int(parse_long(v)); }
#define SET_LONG(field) [](RunConfig& c, const std::string& v) { c.field = parse_long(v); }
#define SET_DBL(field) [](RunConfig& c, const std::string& v) { c.field = parse_double(v); }
#define SET_U64(field) [](RunConfig& c, const std::string& v) { c.field = parse_u64(v); }

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = {
        // encoder
        {"image_size",
         [](RunConfig& c, const std::string& v) {
             c.train.encoder.image_size = int(parse_long(v));
             c.train.synth.image_size = int(parse_long(v));
         }},
        {"patch_size", SET_INT(train.encoder.patch_size)},
        {"embed_dim", SET_INT(train.encoder.embed_dim)},
        {"depth", SET_INT(train.encoder.depth)},
        {"heads", SET_INT(train.encoder.heads)},
        {"mlp_ratio", SET_INT(train.encoder.mlp_ratio)},
        // predictor
        {"pred_dim", SET_INT(train.predictor.pred_dim)},
        {"pred_depth", SET_INT(train.predictor.depth)},
        {"pred_heads", SET_INT(train.predictor.heads)},
        {"pred_mlp_ratio", SET_INT(train.predictor.mlp_ratio)},
        {"conditioner",
         [](RunConfig& c, const std::string& v) {
             c.train.predictor.conditioner = conditioner_from_string(v);
         }},
        {"fusion",
         [](RunConfig& c, const std::string& v) {
             c.train.predictor.fusion = fusion_from_string(v);
         }},
        {"cond_layers",
         [](RunConfig& c, const std::string& v) {
             c.train.predictor.cond_layers = parse_int_list(v);
         }},
        // synthetic data
        {"cell_grid", SET_INT(train.synth.cell_grid)},
        {"num_glyphs", SET_INT(train.synth.num_glyphs)},
        {"num_colors", SET_INT(train.synth.num_colors)},
        {"vocab_size", SET_INT(train.synth.vocab_size)},
        {"seq_len", SET_INT(train.synth.seq_len)},
        {"text_dim", SET_INT(train.synth.embed_dim)},
        {"min_placements", SET_INT(train.synth.min_placements)},
        {"max_placements", SET_INT(train.synth.max_placements)},
        {"embed_seed", SET_U64(train.synth.embed_seed)},
        // masking
        {"num_targets", SET_INT(train.masking.num_targets)},
        {"target_scale_min", SET_DBL(train.masking.target_scale_min)},
        {"target_scale_max", SET_DBL(train.masking.target_scale_max)},
        {"target_aspect_min", SET_DBL(train.masking.target_aspect_min)},
        {"target_aspect_max", SET_DBL(train.masking.target_aspect_max)},
        {"context_scale_min", SET_DBL(train.masking.context_scale_min)},
        {"context_scale_max", SET_DBL(train.masking.context_scale_max)},
        {"retry_budget", SET_INT(train.masking.retry_budget)},
        // optimizer & schedules
        {"lr", SET_DBL(train.optim.lr)},
        {"beta1", SET_DBL(train.optim.beta1)},
        {"beta2", SET_DBL(train.optim.beta2)},
        {"adam_eps", SET_DBL(train.optim.eps)},
        {"wd_start", SET_DBL(train.optim.wd_start)},
        {"wd_end", SET_DBL(train.optim.wd_end)},
        {"warmup_steps", SET_INT(train.optim.warmup_steps)},
        {"lr_final_frac", SET_DBL(train.optim.lr_final_frac)},
        {"ema_start", SET_DBL(train.optim.ema_start)},
        {"ema_end", SET_DBL(train.optim.ema_end)},
        // loss
        {"lambda", SET_DBL(train.loss.lambda)},
        {"beta", SET_DBL(train.loss.beta)},
        // trainer
        {"n_captions", SET_INT(train.n_captions)},
        {"batch_size", SET_INT(train.batch_size)},
        {"dataset_size", SET_LONG(train.dataset_size)},
        {"seed", SET_U64(train.seed)},
        {"steps",
         [](RunConfig& c, const std::string& v) {
             c.train.steps = parse_long(v);
             c.train.optim.total_steps = int(parse_long(v));
         }},
        {"log_every", SET_INT(train.log_every)},
        // probe
        {"probe_train_size", SET_LONG(probe.train_size)},
        {"probe_eval_size", SET_LONG(probe.eval_size)},
        {"probe_epochs", SET_INT(probe.epochs)},
        {"probe_lr", SET_DBL(probe.lr)},
        {"probe_seed", SET_U64(probe.seed)},
    };
    return table;
}

#undef SET_INT
#undef SET_LONG
#undef SET_DBL
#undef SET_U64

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

}  // namespace

void apply_assignments(RunConfig& cfg, const std::vector<std::string>& assignments) {
    std::vector<std::string> unknown;
    for (const auto& a : assignments) {
        size_t eq = a.find('=');
        if (eq == std::string::npos)
            throw ConfigError("malformed assignment '" + a + "' (expected key=value)");
        std::string key = a.substr(0, eq);
        std::string value = a.substr(eq + 1);
        auto it = setters().find(key);
        if (it == setters().end()) {
            unknown.push_back(key);
            continue;
        }
        try {
            it->second(cfg, value);
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception&) {
            throw ConfigError("bad value '" + value + "' for key '" + key + "'");
        }
    }
    if (!unknown.empty()) {
        std::string msg = "unknown config keys:";
        for (const auto& k : unknown) msg += " " + k;
        throw ConfigError(msg);
    }
}

void load_config_file(RunConfig& cfg, const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file '" + path + "'");
    std::vector<std::string> assignments;
    std::string line;
    while (std::getline(f, line)) {
        size_t hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        size_t b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos) continue;
        size_t e = line.find_last_not_of(" \t\r");
        assignments.push_back(line.substr(b, e - b + 1));
    }
    apply_assignments(cfg, assignments);
}

std::string resolved_config(const RunConfig& c) {
    std::ostringstream os;
    auto kv = [&](const std::string& k, const std::string& v) { os << k << "=" << v << "\n"; };
    kv("image_size", std::to_string(c.train.encoder.image_size));
    kv("patch_size", std::to_string(c.train.encoder.patch_size));
    kv("embed_dim", std::to_string(c.train.encoder.embed_dim));
    kv("depth", std::to_string(c.train.encoder.depth));
    kv("heads", std::to_string(c.train.encoder.heads));
    kv("mlp_ratio", std::to_string(c.train.encoder.mlp_ratio));
    kv("pred_dim", std::to_string(c.train.predictor.pred_dim));
    kv("pred_depth", std::to_string(c.train.predictor.depth));
    kv("pred_heads", std::to_string(c.train.predictor.heads));
    kv("pred_mlp_ratio", std::to_string(c.train.predictor.mlp_ratio));
    kv("conditioner", to_string(c.train.predictor.conditioner));
    kv("fusion", to_string(c.train.predictor.fusion));
    kv("cond_layers", int_list_str(c.train.predictor.cond_layers));
    kv("cell_grid", std::to_string(c.train.synth.cell_grid));
    kv("num_glyphs", std::to_string(c.train.synth.num_glyphs));
    kv("num_colors", std::to_string(c.train.synth.num_colors));
    kv("vocab_size", std::to_string(c.train.synth.vocab_size));
    kv("seq_len", std::to_string(c.train.synth.seq_len));
    kv("text_dim", std::to_string(c.train.synth.embed_dim));
    kv("min_placements", std::to_string(c.train.synth.min_placements));
    kv("max_placements", std::to_string(c.train.synth.max_placements));
    kv("embed_seed", std::to_string(c.train.synth.embed_seed));
    kv("num_targets", std::to_string(c.train.masking.num_targets));
    kv("target_scale_min", fmt_double(c.train.masking.target_scale_min));
    kv("target_scale_max", fmt_double(c.train.masking.target_scale_max));
    kv("target_aspect_min", fmt_double(c.train.masking.target_aspect_min));
    kv("target_aspect_max", fmt_double(c.train.masking.target_aspect_max));
    kv("context_scale_min", fmt_double(c.train.masking.context_scale_min));
    kv("context_scale_max", fmt_double(c.train.masking.context_scale_max));
    kv("retry_budget", std::to_string(c.train.masking.retry_budget));
    kv("lr", fmt_double(c.train.optim.lr));
    kv("beta1", fmt_double(c.train.optim.beta1));
    kv("beta2", fmt_double(c.train.optim.beta2));
    kv("adam_eps", fmt_double(c.train.optim.eps));
    kv("wd_start", fmt_double(c.train.optim.wd_start));
    kv("wd_end", fmt_double(c.train.optim.wd_end));
    kv("warmup_steps", std::to_string(c.train.optim.warmup_steps));
    kv("lr_final_frac", fmt_double(c.train.optim.lr_final_frac));
    kv("ema_start", fmt_double(c.train.optim.ema_start));
    kv("ema_end", fmt_double(c.train.optim.ema_end));
    kv("lambda", fmt_double(c.train.loss.lambda));
    kv("beta", fmt_double(c.train.loss.beta));
    kv("n_captions", std::to_string(c.train.n_captions));
    kv("batch_size", std::to_string(c.train.batch_size));
    kv("dataset_size", std::to_string(c.train.dataset_size));
    kv("seed", std::to_string(c.train.seed));
    kv("steps", std::to_string(c.train.steps));
    kv("log_every", std::to_string(c.train.log_every));
    kv("probe_train_size", std::to_string(c.probe.train_size));
    kv("probe_eval_size", std::to_string(c.probe.eval_size));
    kv("probe_epochs", std::to_string(c.probe.epochs));
    kv("probe_lr", fmt_double(c.probe.lr));
    kv("probe_seed", std::to_string(c.probe.seed));
    return os.str();
}

uint64_t config_hash(const RunConfig& cfg) {
    std::string s = resolved_config(cfg);
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::vector<std::string> config_keys() {
    std::vector<std::string> out;
    for (const auto& [k, _] : setters()) out.push_back(k);
    return out;
}

}  // namespace tcjepa
