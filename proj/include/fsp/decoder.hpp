#ifndef FSP_DECODER_HPP
#define FSP_DECODER_HPP

#include <string>
#include <vector>

#include "fsp/common.hpp"
#include "fsp/hmm.hpp"
#include "fsp/scod.hpp"

namespace fsp {

struct FactorialModel {
  Hmm speech_chain;
  Hmm noise_chain;
  ScodGrid scod;
  // state -> word label for transcript recovery; empty string marks
  // silence / short-pause states. May be empty when no grammar is attached.
  std::vector<std::string> state_words;
  // state -> 1 when the state is the exit (final) state of a word instance;
  // when non-empty, transcripts are recovered from traversed exit states so a
  // partially entered word emits nothing. Empty falls back to run collapsing.
  std::vector<std::uint8_t> word_end_states;

  void validate() const;
};

struct DecodeResult {
  std::vector<int> speech_path;
  std::vector<int> noise_path;
  double log_likelihood = 0.0;
  std::vector<std::string> word_sequence;
  // Score-combine operations in the between-slice recursions (the
  // standard-Viterbi-comparable count used for complexity comparisons).
  uint64_t op_count = 0;
  // Score-combine operations of the within-slice (noise) stage of the
  // two-dimensional search; zero for the mega-state decoder.
  uint64_t within_slice_ops = 0;
};

// Two-dimensional Viterbi: inner max over the noise chain within each time
// slice, outer max over the speech chain between slices. Ties break toward
// the lowest state index, noise stage before speech stage. A beam of
// +infinity (the default) is exact.
DecodeResult factorial_viterbi(const FactorialModel& model, const Mat& observations,
                               double beam = std::numeric_limits<double>::infinity());

// Standard Viterbi over the Cartesian product state space; same optimum and
// tie-break (lexicographic in (speech, noise)) as factorial_viterbi.
DecodeResult megastate_viterbi(const FactorialModel& model, const Mat& observations);

struct ComposedHmm {
  Hmm hmm;
  std::vector<std::string> state_words;  // empty string = silence / short pause
  std::vector<std::uint8_t> word_end_states;
};

// Connected-word composite: optional entry/exit silence, left-to-right word
// models, and a short-pause state between words when looping.
ComposedHmm compose_grammar(const std::vector<std::pair<std::string, Hmm>>& word_models,
                            const Hmm& silence, bool loop);

// Collapse consecutive same-word state runs to tokens; silence and
// short-pause states are dropped and break runs.
std::vector<std::string> transcript_from_path(const std::vector<int>& path,
                                              const std::vector<std::string>& labeling);

// Exit-state recovery: a word is emitted each time the path leaves one of its
// exit states (or ends the utterance in one); entering a word without
// traversing its exit emits nothing.
std::vector<std::string> transcript_from_path(const std::vector<int>& path,
                                              const std::vector<std::string>& labeling,
                                              const std::vector<std::uint8_t>& word_ends);

}  // namespace fsp

#endif
