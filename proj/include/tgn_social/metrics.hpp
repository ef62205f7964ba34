#pragma once

#include <cstdint>
#include <stdexcept>

#include <json.hpp>

namespace tgn_social {

struct Confusion {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
  std::int64_t tn = 0;

  std::int64_t total() const { return tp + fp + fn + tn; }

  void add(bool predicted, bool actual) {
    if (predicted) {
      actual ? ++tp : ++fp;
    } else {
      actual ? ++fn : ++tn;
    }
  }

  Confusion& operator+=(const Confusion& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
  }

  bool operator==(const Confusion&) const = default;
};

/// F1 of the positive class; 0 when there are no positives at all.
inline double f1(const Confusion& c) {
  const std::int64_t denom = 2 * c.tp + c.fp + c.fn;
  return denom == 0 ? 0.0 : 2.0 * static_cast<double>(c.tp) / static_cast<double>(denom);
}

inline double accuracy(const Confusion& c) {
  if (c.total() == 0) throw std::invalid_argument("accuracy of an empty confusion matrix");
  return static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
}

inline nlohmann::ordered_json to_json(const Confusion& c) {
  nlohmann::ordered_json j;
  j["f1"] = f1(c);
  j["accuracy"] = c.total() ? accuracy(c) : 0.0;
  j["tp"] = c.tp;
  j["fp"] = c.fp;
  j["fn"] = c.fn;
  j["tn"] = c.tn;
  return j;
}

}  // namespace tgn_social
