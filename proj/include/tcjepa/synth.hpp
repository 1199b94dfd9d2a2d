#pragma once

#include <string>
#include <vector>

#include "tcjepa/common.hpp"
#include "tcjepa/rng.hpp"
#include "tcjepa/tensor.hpp"

namespace tcjepa {

/// Synthetic compositional scenes: colored glyphs placed on a cell grid, with
/// token captions that fully determine the pixel content of the cells they
/// mention. This is what makes "text reduces prediction uncertainty" testable.
struct SynthConfig {
    int image_size = 32;     // square, divisible by cell_grid
    int cell_grid = 4;       // cells per side
    int num_glyphs = 8;
    int num_colors = 4;
    int vocab_size = 64;
    int seq_len = 24;        // fixed S, padded
    int embed_dim = 32;      // d_t
    int min_placements = 2;
    int max_placements = 6;  // kept <= seq_len/4 so one caption can cover all
    uint64_t embed_seed = 7;

    int num_cells() const { return cell_grid * cell_grid; }
    int cell_pixels() const { return image_size / cell_grid; }
};

struct Placement {
    int glyph_id;
    int color_id;
    int cell;  // row-major cell index
};

struct SceneSpec {
    int cell_grid = 4;
    std::vector<Placement> placements;  // distinct cells, >= 2
    uint64_t seed = 0;
};

struct Caption {
    std::vector<int> token_ids;  // length S, padded with pad token
    int num_tokens = 0;          // non-pad prefix length
};

/// Token id layout and the frozen seeded embedding table (stands in for a
/// pretrained text encoder; never trained, pad embeds to zero).
struct Vocabulary {
    SynthConfig cfg;
    Tensor<double> table;  // [embed_dim x vocab_size]

    explicit Vocabulary(const SynthConfig& c);

    int pad() const { return 0; }
    int sep() const { return 1; }
    int glyph_tok(int g) const { return 2 + g; }
    int color_tok(int c) const { return 2 + cfg.num_glyphs + c; }
    int pos_tok(int cell) const { return 2 + cfg.num_glyphs + cfg.num_colors + cell; }
};

struct SynthSample {
    SceneSpec scene;
    std::vector<float> image;      // [H x W x 3], row-major, values in [0,1]
    std::vector<Caption> captions; // N captions
    int label;                     // subject glyph id (top-left-most placement)
};

SceneSpec gen_scene(const SynthConfig& cfg, uint64_t seed);

std::vector<float> render(const SceneSpec& scene, int image_size);

/// Each caption mentions a random nonempty subset of placements as
/// (color, glyph, position, sep) token quadruples; the last caption picks up
/// everything not yet covered so the union always mentions every placement.
std::vector<Caption> gen_captions(const SceneSpec& scene, const Vocabulary& vocab,
                                  int n_captions, uint64_t seed);

SynthSample make_sample(const SynthConfig& cfg, const Vocabulary& vocab,
                        int n_captions, uint64_t dataset_seed, long index);

/// Word-embedding lookup: column s of the result is table[:, token_id_s].
template <class T>
Tensor<T> embed_caption(const Vocabulary& vocab, const Caption& cap) {
    int dt = vocab.cfg.embed_dim, S = vocab.cfg.seq_len;
    Tensor<T> t({dt, S});
    for (int s = 0; s < S; ++s) {
        int id = cap.token_ids[s];
        if (id < 0 || id >= vocab.cfg.vocab_size)
            throw DomainError("embed_caption: unknown token id " + std::to_string(id));
        for (int d = 0; d < dt; ++d)
            t.data[size_t(d) * S + s] = T(vocab.table.data[size_t(d) * vocab.cfg.vocab_size + id]);
    }
    return t;
}

/// Raw f32 image blobs + JSON manifest (token ids, labels, seeds).
void export_dataset(const std::string& dir, const SynthConfig& cfg,
                    const std::vector<SynthSample>& samples);
std::vector<SynthSample> import_dataset(const std::string& dir, SynthConfig& cfg_out);

}  // namespace tcjepa
