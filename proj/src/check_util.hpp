#pragma once

#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "interlace/checks.hpp"
#include "interlace/stats.hpp"

namespace interlace::detail {

// "key=value;key=value" builder for CheckReport::parameters.
class ParamList {
 public:
  ParamList() = default;
  // Continue an existing list.
  explicit ParamList(const std::string& prefix) : first_(prefix.empty()) { os_ << prefix; }

  template <class T>
  ParamList& add(const char* key, const T& value) {
    if (!first_) os_ << ';';
    first_ = false;
    os_ << key << '=' << value;
    return *this;
  }
  template <class T>
  ParamList& add_list(const char* key, const std::vector<T>& values) {
    if (!first_) os_ << ';';
    first_ = false;
    os_ << key << '=';
    for (std::size_t i = 0; i < values.size(); ++i) os_ << (i ? "|" : "") << values[i];
    return *this;
  }
  std::string str() const;

 private:
  std::ostringstream os_;
  bool first_ = true;
};

// Two-sided slope check |slope - target| <= tol.
CheckReport slope_report(std::string id, const LinearFit& fit, double target, double tol, std::string params,
                         std::size_t replicas, std::uint64_t seed, std::string what);

}  // namespace interlace::detail
