#pragma once

// Piecewise-linear RCLL vector paths. A path is its initial value plus, at
// each breakpoint, a jump vector applied at that instant and a slope vector
// valid until the next breakpoint. Evaluation is exact in the breakpoint
// data; there is no grid.

#include <Eigen/Dense>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "rbnet/errors.hpp"

namespace rbnet {

using Eigen::MatrixXd;
using Eigen::VectorXd;

class MarkedPath {
 public:
  MarkedPath() : dim_(0), horizon_(0) {}
  MarkedPath(int dim, double horizon, VectorXd init)
      : dim_(dim), horizon_(horizon), init_(std::move(init)) {}

  int dim() const { return dim_; }
  double horizon() const { return horizon_; }
  const VectorXd& init() const { return init_; }
  std::size_t n_breakpoints() const { return times_.size(); }
  double time(std::size_t i) const { return times_[i]; }

  Eigen::Map<const VectorXd> jump(std::size_t i) const {
    return Eigen::Map<const VectorXd>(jumps_.data() + i * dim_, dim_);
  }
  Eigen::Map<const VectorXd> slope(std::size_t i) const {
    return Eigen::Map<const VectorXd>(slopes_.data() + i * dim_, dim_);
  }

  void append_breakpoint(double t, const VectorXd& jump, const VectorXd& slope) {
    if (!times_.empty() && !(t > times_.back())) {
      throw Error(Errc::ConfigError, "breakpoints must be strictly increasing");
    }
    if (times_.empty() && t != 0.0) {
      // paths always carry an (possibly zero-jump) anchor at t = 0
      times_.push_back(0.0);
      jumps_.insert(jumps_.end(), dim_, 0.0);
      slopes_.insert(slopes_.end(), dim_, 0.0);
    }
    times_.push_back(t);
    jumps_.insert(jumps_.end(), jump.data(), jump.data() + dim_);
    slopes_.insert(slopes_.end(), slope.data(), slope.data() + dim_);
  }

  // Value right after all jumps at breakpoints <= t (RCLL convention).
  VectorXd value(double t) const {
    VectorXd v = init_;
    for (std::size_t i = 0; i < times_.size(); ++i) {
      if (times_[i] > t) break;
      v += jump(i);
      const double seg_end = (i + 1 < times_.size()) ? std::min(times_[i + 1], t) : t;
      v += slope(i) * (seg_end - times_[i]);
    }
    return v;
  }

  VectorXd left_limit(double t) const {
    VectorXd v = init_;
    for (std::size_t i = 0; i < times_.size(); ++i) {
      if (times_[i] >= t) break;
      v += jump(i);
      const double seg_end = (i + 1 < times_.size()) ? std::min(times_[i + 1], t) : t;
      v += slope(i) * (seg_end - times_[i]);
    }
    return v;
  }

  // Values at every breakpoint (post-jump), one pass.
  std::vector<VectorXd> breakpoint_values() const {
    std::vector<VectorXd> out;
    out.reserve(times_.size());
    VectorXd v = init_;
    for (std::size_t i = 0; i < times_.size(); ++i) {
      v += jump(i);
      out.push_back(v);
      const double seg_end = (i + 1 < times_.size()) ? times_[i + 1] : horizon_;
      v += slope(i) * (seg_end - times_[i]);
    }
    return out;
  }

  VectorXd end_value() const { return value(horizon_); }

  // Componentwise integral of the path over [0, horizon]. Exact.
  VectorXd integrate() const {
    VectorXd acc = VectorXd::Zero(dim_);
    VectorXd v = init_;
    for (std::size_t i = 0; i < times_.size(); ++i) {
      v += jump(i);
      const double seg_end = (i + 1 < times_.size()) ? times_[i + 1] : horizon_;
      const double h = seg_end - times_[i];
      acc += v * h + 0.5 * h * h * slope(i);
      v += slope(i) * h;
    }
    if (times_.empty()) acc += init_ * horizon_;
    return acc;
  }

  void set_horizon(double T) { horizon_ = T; }

  void to_csv(std::ostream& os) const {
    os << "# dim=" << dim_ << " horizon=";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", horizon_);
    os << buf << "\n# init";
    for (int j = 0; j < dim_; ++j) {
      std::snprintf(buf, sizeof buf, ",%.17g", init_[j]);
      os << buf;
    }
    os << "\nt";
    for (int j = 0; j < dim_; ++j) os << ",jump" << j + 1;
    for (int j = 0; j < dim_; ++j) os << ",slope" << j + 1;
    os << "\n";
    for (std::size_t i = 0; i < times_.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", times_[i]);
      os << buf;
      for (int j = 0; j < dim_; ++j) {
        std::snprintf(buf, sizeof buf, ",%.17g", jump(i)[j]);
        os << buf;
      }
      for (int j = 0; j < dim_; ++j) {
        std::snprintf(buf, sizeof buf, ",%.17g", slope(i)[j]);
        os << buf;
      }
      os << "\n";
    }
  }

  static MarkedPath from_csv(std::istream& is) {
    std::string line;
    std::getline(is, line);
    int dim = 0;
    double horizon = 0;
    if (std::sscanf(line.c_str(), "# dim=%d horizon=%lg", &dim, &horizon) != 2) {
      throw Error(Errc::ConfigError, "bad path csv header");
    }
    std::getline(is, line);
    VectorXd init(dim);
    {
      std::stringstream ss(line.substr(std::string("# init").size()));
      char comma;
      for (int j = 0; j < dim; ++j) ss >> comma >> init[j];
    }
    std::getline(is, line);  // column header
    MarkedPath p(dim, horizon, init);
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      std::stringstream ss(line);
      double t;
      char comma;
      ss >> t;
      VectorXd jp(dim), sl(dim);
      for (int j = 0; j < dim; ++j) ss >> comma >> jp[j];
      for (int j = 0; j < dim; ++j) ss >> comma >> sl[j];
      p.append_breakpoint(t, jp, sl);
    }
    return p;
  }

 private:
  int dim_;
  double horizon_;
  VectorXd init_;
  std::vector<double> times_;
  std::vector<double> jumps_;   // flattened, dim_ per breakpoint
  std::vector<double> slopes_;  // flattened, dim_ per breakpoint
};

// Sup distance between two paths of equal dimension, evaluated at the union
// of breakpoints (values and left limits). Exact for polyline pairs.
inline double sup_distance(const MarkedPath& a, const MarkedPath& b) {
  double d = 0.0;
  auto probe = [&](double t) {
    d = std::max(d, (a.value(t) - b.value(t)).cwiseAbs().maxCoeff());
    d = std::max(d, (a.left_limit(t) - b.left_limit(t)).cwiseAbs().maxCoeff());
  };
  for (std::size_t i = 0; i < a.n_breakpoints(); ++i) probe(a.time(i));
  for (std::size_t i = 0; i < b.n_breakpoints(); ++i) probe(b.time(i));
  probe(std::min(a.horizon(), b.horizon()));
  return d;
}

}  // namespace rbnet
