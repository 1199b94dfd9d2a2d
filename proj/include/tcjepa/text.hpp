#pragma once

#include <vector>

#include "tcjepa/synth.hpp"
#include "tcjepa/tensor.hpp"

namespace tcjepa {

/// One caption prepared for conditioning: embedding matrix t [d_t x S],
/// 0/1 pad mask over positions, and the mean-pooled holistic embedding.
template <class T>
struct WordSequence {
    Tensor<T> t;         // [d_t x S]
    Tensor<T> pad_mask;  // [1 x S], 1 at real tokens
    Tensor<T> holistic;  // [1 x d_t], mean over non-pad columns
    int num_tokens = 0;
};

template <class T>
WordSequence<T> make_word_sequence(const Vocabulary& vocab, const Caption& cap) {
    if (vocab.cfg.seq_len < 1) throw DomainError("word sequence: S must be >= 1");
    WordSequence<T> w;
    w.t = embed_caption<T>(vocab, cap);
    int dt = vocab.cfg.embed_dim, S = vocab.cfg.seq_len;
    w.pad_mask = Tensor<T>::zeros({1, S});
    w.holistic = Tensor<T>::zeros({1, dt});
    w.num_tokens = 0;
    for (int s = 0; s < S; ++s)
        if (cap.token_ids[s] != vocab.pad()) {
            w.pad_mask.data[s] = T(1);
            ++w.num_tokens;
        }
    if (w.num_tokens == 0) throw DomainError("word sequence: caption has no tokens");
    for (int d = 0; d < dt; ++d) {
        T acc = 0;
        for (int s = 0; s < S; ++s)
            if (w.pad_mask.data[s] > T(0)) acc += w.t.data[size_t(d) * S + s];
        w.holistic.data[d] = acc / T(w.num_tokens);
    }
    return w;
}

/// N captions for one image.
template <class T>
using CaptionBatch = std::vector<WordSequence<T>>;

template <class T>
CaptionBatch<T> make_caption_batch(const Vocabulary& vocab,
                                   const std::vector<Caption>& caps) {
    CaptionBatch<T> out;
    for (const auto& c : caps) out.push_back(make_word_sequence<T>(vocab, c));
    return out;
}

}  // namespace tcjepa
