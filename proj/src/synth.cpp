#include "tcjepa/synth.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include <json.hpp>

namespace tcjepa {

namespace {

// 4x4 bitmap per glyph, visually distinct
constexpr uint16_t kGlyphBitmaps[8] = {
    0b1111'1001'1001'1111,  // box
    0b0110'0110'0110'0110,  // bar
    0b1001'0110'0110'1001,  // x
    0b1111'0010'0100'1111,  // z
    0b0110'1001'1001'0110,  // o
    0b1000'1000'1000'1111,  // L
    0b1111'1111'0000'0000,  // upper half
    0b1010'0101'1010'0101,  // checker
};

constexpr float kPalette[4][3] = {
    {0.95f, 0.15f, 0.15f},
    {0.15f, 0.85f, 0.20f},
    {0.20f, 0.30f, 0.95f},
    {0.95f, 0.85f, 0.10f},
};

constexpr float kBackground = 0.25f;

}  // namespace

Vocabulary::Vocabulary(const SynthConfig& c) : cfg(c), table({c.embed_dim, c.vocab_size}) {
    int needed = 2 + c.num_glyphs + c.num_colors + c.num_cells();
    if (c.vocab_size < needed)
        throw ConfigError("vocab_size " + std::to_string(c.vocab_size) +
                          " too small, need " + std::to_string(needed));
    Rng rng(c.embed_seed);
    double scale = 1.0 / std::sqrt(double(c.embed_dim));
    for (int d = 0; d < c.embed_dim; ++d)
        for (int v = 0; v < c.vocab_size; ++v)
            table.data[size_t(d) * c.vocab_size + v] = v == 0 ? 0.0 : rng.normal() * scale;
}

SceneSpec gen_scene(const SynthConfig& cfg, uint64_t seed) {
    Rng rng(seed * 0x9e3779b97f4a7c15ULL + 0x1234567ULL);
    SceneSpec scene;
    scene.cell_grid = cfg.cell_grid;
    scene.seed = seed;
    int cells = cfg.num_cells();
    int hi = std::min(cfg.max_placements, cells);
    int lo = std::min(cfg.min_placements, hi);
    int count = lo + int(rng.uniform_int(uint64_t(hi - lo + 1)));
    std::set<int> used;
    for (int k = 0; k < count; ++k) {
        int cell;
        do {
            cell = int(rng.uniform_int(uint64_t(cells)));
        } while (used.count(cell));
        used.insert(cell);
        scene.placements.push_back({int(rng.uniform_int(uint64_t(cfg.num_glyphs))),
                                    int(rng.uniform_int(uint64_t(cfg.num_colors))), cell});
    }
    return scene;
}

std::vector<float> render(const SceneSpec& scene, int image_size) {
    int grid = scene.cell_grid;
    if (image_size % grid != 0)
        throw DimensionError("render: image size not divisible by cell grid");
    int cell_px = image_size / grid;
    std::vector<float> img(size_t(image_size) * image_size * 3, kBackground);
    for (const auto& p : scene.placements) {
        int cr = p.cell / grid, cc = p.cell % grid;
        uint16_t bm = kGlyphBitmaps[p.glyph_id % 8];
        const float* tint = kPalette[p.color_id % 4];
        for (int y = 0; y < cell_px; ++y) {
            int by = y * 4 / cell_px;
            for (int x = 0; x < cell_px; ++x) {
                int bx = x * 4 / cell_px;
                bool on = (bm >> (15 - (by * 4 + bx))) & 1;
                if (!on) continue;
                size_t px = (size_t(cr * cell_px + y) * image_size + (cc * cell_px + x)) * 3;
                img[px + 0] = tint[0];
                img[px + 1] = tint[1];
                img[px + 2] = tint[2];
            }
        }
    }
    return img;
}

std::vector<Caption> gen_captions(const SceneSpec& scene, const Vocabulary& vocab,
                                  int n_captions, uint64_t seed) {
    if (n_captions < 1) throw DomainError("gen_captions: need N >= 1");
    const SynthConfig& cfg = vocab.cfg;
    Rng rng(seed * 0x9e3779b97f4a7c15ULL + 0xabcdefULL);
    int P = int(scene.placements.size());
    int max_mentions = cfg.seq_len / 4;

    std::vector<bool> covered(P, false);
    std::vector<Caption> caps;
    for (int n = 0; n < n_captions; ++n) {
        std::vector<int> mention;
        if (n == n_captions - 1) {
            for (int p = 0; p < P; ++p)
                if (!covered[p]) mention.push_back(p);
        }
        for (int p = 0; p < P; ++p) {
            if (int(mention.size()) >= max_mentions) break;
            bool already = std::find(mention.begin(), mention.end(), p) != mention.end();
            if (!already && rng.uniform() < 0.5) mention.push_back(p);
        }
        if (mention.empty()) mention.push_back(int(rng.uniform_int(uint64_t(P))));
        if (int(mention.size()) > max_mentions) mention.resize(max_mentions);
        std::sort(mention.begin(), mention.end());

        Caption cap;
        cap.token_ids.assign(cfg.seq_len, vocab.pad());
        int pos = 0;
        for (int p : mention) {
            const auto& pl = scene.placements[p];
            cap.token_ids[pos++] = vocab.color_tok(pl.color_id);
            cap.token_ids[pos++] = vocab.glyph_tok(pl.glyph_id);
            cap.token_ids[pos++] = vocab.pos_tok(pl.cell);
            cap.token_ids[pos++] = vocab.sep();
            covered[p] = true;
        }
        cap.num_tokens = pos;
        caps.push_back(std::move(cap));
    }
    // last caption must have room for everything uncovered
    for (int p = 0; p < P; ++p)
        if (!covered[p])
            throw DomainError("gen_captions: coverage invariant violated (scene too dense)");
    return caps;
}

SynthSample make_sample(const SynthConfig& cfg, const Vocabulary& vocab,
                        int n_captions, uint64_t dataset_seed, long index) {
    uint64_t s = dataset_seed ^ (uint64_t(index) * 0xd1342543de82ef95ULL + 0x5851f42dULL);
    SynthSample sample;
    sample.scene = gen_scene(cfg, s);
    sample.image = render(sample.scene, cfg.image_size);
    sample.captions = gen_captions(sample.scene, vocab, n_captions, s ^ 0xc0ffee);
    // the subject is the top-left-most placement (smallest cell index): a pure
    // function of the rendered image, so a probe can in principle recover it
    const Placement* subj = &sample.scene.placements[0];
    for (const auto& p : sample.scene.placements)
        if (p.cell < subj->cell) subj = &p;
    sample.label = subj->glyph_id;
    return sample;
}

void export_dataset(const std::string& dir, const SynthConfig& cfg,
                    const std::vector<SynthSample>& samples) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    std::ofstream blob(fs::path(dir) / "images.bin", std::ios::binary);
    nlohmann::json manifest;
    manifest["image_size"] = cfg.image_size;
    manifest["cell_grid"] = cfg.cell_grid;
    manifest["seq_len"] = cfg.seq_len;
    manifest["vocab_size"] = cfg.vocab_size;
    manifest["embed_dim"] = cfg.embed_dim;
    manifest["embed_seed"] = cfg.embed_seed;
    auto& items = manifest["samples"];
    items = nlohmann::json::array();
    for (const auto& s : samples) {
        blob.write(reinterpret_cast<const char*>(s.image.data()),
                   std::streamsize(s.image.size() * sizeof(float)));
        nlohmann::json item;
        item["seed"] = s.scene.seed;
        item["label"] = s.label;
        auto& caps = item["captions"];
        caps = nlohmann::json::array();
        for (const auto& c : s.captions) caps.push_back(c.token_ids);
        items.push_back(std::move(item));
    }
    std::ofstream(fs::path(dir) / "manifest.json") << manifest.dump(2) << "\n";
}

std::vector<SynthSample> import_dataset(const std::string& dir, SynthConfig& cfg_out) {
    namespace fs = std::filesystem;
    std::ifstream mf(fs::path(dir) / "manifest.json");
    if (!mf) throw DataError("import_dataset: cannot open manifest in " + dir);
    nlohmann::json manifest = nlohmann::json::parse(mf);
    cfg_out.image_size = manifest.at("image_size");
    cfg_out.cell_grid = manifest.at("cell_grid");
    cfg_out.seq_len = manifest.at("seq_len");
    cfg_out.vocab_size = manifest.at("vocab_size");
    cfg_out.embed_dim = manifest.at("embed_dim");
    cfg_out.embed_seed = manifest.at("embed_seed");

    std::ifstream blob(fs::path(dir) / "images.bin", std::ios::binary);
    if (!blob) throw DataError("import_dataset: cannot open images.bin in " + dir);
    std::vector<SynthSample> out;
    size_t img_len = size_t(cfg_out.image_size) * cfg_out.image_size * 3;
    for (const auto& item : manifest.at("samples")) {
        SynthSample s;
        s.scene = gen_scene(cfg_out, item.at("seed").get<uint64_t>());
        s.label = item.at("label");
        s.image.resize(img_len);
        blob.read(reinterpret_cast<char*>(s.image.data()),
                  std::streamsize(img_len * sizeof(float)));
        if (!blob) throw DataError("import_dataset: images.bin truncated");
        for (const auto& c : item.at("captions")) {
            Caption cap;
            cap.token_ids = c.get<std::vector<int>>();
            cap.num_tokens = 0;
            for (size_t i = 0; i < cap.token_ids.size(); ++i)
                if (cap.token_ids[i] != 0) cap.num_tokens = int(i) + 1;
            s.captions.push_back(std::move(cap));
        }
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace tcjepa
