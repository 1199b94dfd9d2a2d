#include <doctest.h>

#include <filesystem>
#include <set>

#include "tcjepa/synth.hpp"
#include "tcjepa/text.hpp"

using namespace tcjepa;

namespace {

SynthConfig small_cfg() {
    SynthConfig c;
    c.image_size = 16;
    return c;
}

}  // namespace

TEST_CASE("vocabulary layout and frozen embeddings") {
    SynthConfig cfg = small_cfg();
    Vocabulary v1(cfg), v2(cfg);
    CHECK(v1.table.data == v2.table.data);  // deterministic
    // pad column embeds to exactly zero
    for (int d = 0; d < cfg.embed_dim; ++d)
        CHECK(v1.table.data[size_t(d) * cfg.vocab_size + v1.pad()] == 0.0);
    // all token ids distinct and in range
    std::set<int> ids = {v1.pad(), v1.sep()};
    for (int g = 0; g < cfg.num_glyphs; ++g) ids.insert(v1.glyph_tok(g));
    for (int c = 0; c < cfg.num_colors; ++c) ids.insert(v1.color_tok(c));
    for (int p = 0; p < cfg.num_cells(); ++p) ids.insert(v1.pos_tok(p));
    CHECK(int(ids.size()) == 2 + cfg.num_glyphs + cfg.num_colors + cfg.num_cells());
    CHECK(*ids.rbegin() < cfg.vocab_size);

    SynthConfig tiny = cfg;
    tiny.vocab_size = 4;
    CHECK_THROWS_AS(Vocabulary{tiny}, ConfigError);
}

TEST_CASE("scenes are valid and deterministic") {
    SynthConfig cfg = small_cfg();
    for (uint64_t s = 0; s < 200; ++s) {
        SceneSpec a = gen_scene(cfg, s);
        SceneSpec b = gen_scene(cfg, s);
        CHECK(a.placements.size() == b.placements.size());
        CHECK(int(a.placements.size()) >= cfg.min_placements);
        CHECK(int(a.placements.size()) <= cfg.max_placements);
        std::set<int> cells;
        for (size_t i = 0; i < a.placements.size(); ++i) {
            const auto& p = a.placements[i];
            CHECK(p.glyph_id >= 0);
            CHECK(p.glyph_id < cfg.num_glyphs);
            CHECK(p.color_id >= 0);
            CHECK(p.color_id < cfg.num_colors);
            CHECK(p.cell >= 0);
            CHECK(p.cell < cfg.num_cells());
            cells.insert(p.cell);
            CHECK(p.cell == b.placements[i].cell);
        }
        CHECK(cells.size() == a.placements.size());  // collision-free
    }
}

TEST_CASE("caption union covers every placement") {
    SynthConfig cfg = small_cfg();
    Vocabulary vocab(cfg);
    for (uint64_t s = 0; s < 100; ++s) {
        SceneSpec scene = gen_scene(cfg, s);
        for (int n : {1, 2, 4}) {
            auto caps = gen_captions(scene, vocab, n, s + 1);
            CHECK(int(caps.size()) == n);
            std::set<int> mentioned_cells;
            for (const auto& c : caps) {
                CHECK(c.num_tokens % 4 == 0);
                CHECK(c.num_tokens >= 4);
                CHECK(int(c.token_ids.size()) == cfg.seq_len);
                for (int i = 0; i + 3 < c.num_tokens; i += 4) {
                    int cell = c.token_ids[i + 2] - (2 + cfg.num_glyphs + cfg.num_colors);
                    mentioned_cells.insert(cell);
                    CHECK(c.token_ids[i + 3] == vocab.sep());
                }
            }
            std::set<int> placed;
            for (const auto& p : scene.placements) placed.insert(p.cell);
            CHECK(mentioned_cells == placed);
        }
    }
}

TEST_CASE("captions fully determine the pixels of mentioned cells") {
    // decode (color, glyph, pos) from tokens, re-render that placement in
    // isolation and compare against the sample's cell pixel block
    SynthConfig cfg = small_cfg();
    Vocabulary vocab(cfg);
    int cp = cfg.cell_pixels();
    for (long idx = 0; idx < 50; ++idx) {
        SynthSample s = make_sample(cfg, vocab, 3, 42, idx);
        for (const auto& cap : s.captions) {
            for (int i = 0; i + 3 < cap.num_tokens; i += 4) {
                int color = cap.token_ids[i] - (2 + cfg.num_glyphs);
                int glyph = cap.token_ids[i + 1] - 2;
                int cell = cap.token_ids[i + 2] - (2 + cfg.num_glyphs + cfg.num_colors);
                SceneSpec one;
                one.cell_grid = cfg.cell_grid;
                one.placements = {{glyph, color, cell}};
                auto ref = render(one, cfg.image_size);
                int cr = cell / cfg.cell_grid, cc = cell % cfg.cell_grid;
                for (int y = 0; y < cp; ++y)
                    for (int x = 0; x < cp; ++x)
                        for (int ch = 0; ch < 3; ++ch) {
                            size_t px = (size_t(cr * cp + y) * cfg.image_size +
                                         (cc * cp + x)) * 3 + ch;
                            CHECK(s.image[px] == ref[px]);
                        }
            }
        }
    }
}

TEST_CASE("render rejects bad divisibility and glyphs differ") {
    SceneSpec scene;
    scene.cell_grid = 3;
    CHECK_THROWS_AS(render(scene, 16), DimensionError);

    SynthConfig cfg = small_cfg();
    std::set<std::vector<float>> images;
    for (int g = 0; g < cfg.num_glyphs; ++g) {
        SceneSpec one;
        one.cell_grid = cfg.cell_grid;
        one.placements = {{g, 0, 0}};
        images.insert(render(one, cfg.image_size));
    }
    CHECK(int(images.size()) == cfg.num_glyphs);  // visually distinct glyphs
}

TEST_CASE("word sequences: pad mask, holistic mean, errors") {
    SynthConfig cfg = small_cfg();
    Vocabulary vocab(cfg);
    SynthSample s = make_sample(cfg, vocab, 2, 7, 0);
    auto batch = make_caption_batch<double>(vocab, s.captions);
    for (size_t n = 0; n < batch.size(); ++n) {
        const auto& w = batch[n];
        CHECK(w.num_tokens == s.captions[n].num_tokens);
        for (int sp = 0; sp < cfg.seq_len; ++sp) {
            bool is_pad = s.captions[n].token_ids[sp] == vocab.pad();
            CHECK(w.pad_mask.data[sp] == (is_pad ? 0.0 : 1.0));
            if (is_pad)
                for (int d = 0; d < cfg.embed_dim; ++d)
                    CHECK(w.t.data[size_t(d) * cfg.seq_len + sp] == 0.0);
        }
        // holistic = mean over non-pad columns
        for (int d = 0; d < cfg.embed_dim; ++d) {
            double acc = 0;
            for (int sp = 0; sp < w.num_tokens; ++sp)
                acc += w.t.data[size_t(d) * cfg.seq_len + sp];
            CHECK(w.holistic.data[d] == doctest::Approx(acc / w.num_tokens).epsilon(1e-12));
        }
    }
    Caption empty;
    empty.token_ids.assign(cfg.seq_len, vocab.pad());
    CHECK_THROWS_AS(make_word_sequence<double>(vocab, empty), DomainError);
}

TEST_CASE("dataset export/import round trip") {
    namespace fs = std::filesystem;
    SynthConfig cfg = small_cfg();
    Vocabulary vocab(cfg);
    std::vector<SynthSample> samples;
    for (long i = 0; i < 8; ++i) samples.push_back(make_sample(cfg, vocab, 2, 11, i));
    std::string dir = (fs::temp_directory_path() / "tcjepa_ds_test").string();
    export_dataset(dir, cfg, samples);
    SynthConfig cfg2;
    auto loaded = import_dataset(dir, cfg2);
    CHECK(cfg2.image_size == cfg.image_size);
    REQUIRE(loaded.size() == samples.size());
    for (size_t i = 0; i < samples.size(); ++i) {
        CHECK(loaded[i].image == samples[i].image);
        CHECK(loaded[i].label == samples[i].label);
        REQUIRE(loaded[i].captions.size() == samples[i].captions.size());
        for (size_t c = 0; c < samples[i].captions.size(); ++c) {
            CHECK(loaded[i].captions[c].token_ids == samples[i].captions[c].token_ids);
            CHECK(loaded[i].captions[c].num_tokens == samples[i].captions[c].num_tokens);
        }
    }
    fs::remove_all(dir);
    CHECK_THROWS_AS(import_dataset(dir, cfg2), DataError);
}
