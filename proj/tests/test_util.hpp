// Copyright 2026 The MGPN Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#pragma once

// Shared helpers for the unit suites: random fills and central-difference
// gradient comparison.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>

#include "mgpn/tensor.hpp"

namespace mgpn::testutil {

inline Mat random_mat(Rng& rng, Eigen::Index rows, Eigen::Index cols, double stddev = 1.0) {
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal(0.0, stddev);
  return m;
}

inline Vec random_vec(Rng& rng, Eigen::Index n, double stddev = 1.0) {
  Vec v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = rng.normal(0.0, stddev);
  return v;
}

inline void randomize(ParamStore& params, Rng& rng, double stddev = 0.3) {
  for (auto& e : params.entries())
    for (double& v : e.data) v = rng.normal(0.0, stddev);
}

struct GradReport {
  double max_rel = 0.0;
  std::string where;
  std::size_t checked = 0;
};

inline double rel_error(double a, double n, double floor) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), floor});
}

inline std::string fmt_sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6e", v);
  return buf;
}

inline void note(GradReport& r, double a, double n, double floor, const std::string& where) {
  ++r.checked;
  const double rel = rel_error(a, n, floor);
  if (rel > r.max_rel) {
    r.max_rel = rel;
    r.where = where + " analytic " + fmt_sci(a) + " numeric " + fmt_sci(n);
  }
}

/// Every element of every array (up to `per_array` each) against `analytic`.
template <typename Loss>
GradReport check_params(ParamStore& params, const ParamStore& analytic, Loss&& loss,
                        double h = 1e-6, std::size_t per_array = 64, double floor = 1e-8) {
  GradReport r;
  for (std::size_t k = 0; k < params.entries().size(); ++k) {
    auto& e = params.entries()[k];
    const std::size_t step = std::max<std::size_t>(1, e.data.size() / per_array);
    for (std::size_t i = 0; i < e.data.size(); i += step) {
      const double saved = e.data[i];
      e.data[i] = saved + h;
      const double up = loss();
      e.data[i] = saved - h;
      const double down = loss();
      e.data[i] = saved;
      note(r, analytic.entries()[k].data[i], (up - down) / (2 * h), floor,
           e.name + "[" + std::to_string(i) + "]");
    }
  }
  return r;
}

template <typename Loss>
GradReport check_input(Mat& x, const Mat& analytic, Loss&& loss, const std::string& name,
                       double h = 1e-6, double floor = 1e-8) {
  GradReport r;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double saved = x.data()[i];
    x.data()[i] = saved + h;
    const double up = loss();
    x.data()[i] = saved - h;
    const double down = loss();
    x.data()[i] = saved;
    note(r, analytic.data()[i], (up - down) / (2 * h), floor,
         name + "[" + std::to_string(i) + "]");
  }
  return r;
}

}  // namespace mgpn::testutil
