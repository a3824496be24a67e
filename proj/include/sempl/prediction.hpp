#pragma once

namespace sempl {

// One classifier output. `score` is the probability of the plausible class;
// the hard label is tied to the 0.5 threshold. `truncated` records that the
// prompt exceeded the model's maximum sequence length.
struct Prediction {
  int label = 0;
  double score = 0.0;
  bool truncated = false;

  bool operator==(const Prediction&) const = default;
};

}  // namespace sempl
