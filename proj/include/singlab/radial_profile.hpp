#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "errors.hpp"
#include "format.hpp"
#include "special_functions.hpp"

namespace singlab {

// Leading singularity C r^{-a} log^b(2e/r) as r -> 0.
struct SingExp {
  double a = 0.0;
  double b = 0.0;

  double shape(double r) const {
    double v = a == 0.0 ? 1.0 : std::pow(r, -a);
    if (b != 0.0) v *= std::pow(log2e(r), b);
    return v;
  }
};

class RadialProfile {
 public:
  RadialProfile() = default;

  RadialProfile(std::vector<double> nodes, std::vector<double> values, SingExp sing = {})
      : nodes_(std::move(nodes)), values_(std::move(values)), sing_(sing) {
    if (nodes_.empty() || nodes_.size() != values_.size())
      throw DomainError("RadialProfile: nodes and values must be nonempty and of equal length");
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      if (!(nodes_[i] > 0.0 && nodes_[i] <= 1.0 + 1e-12))
        throw DomainError("RadialProfile: nodes must lie in (0, 1]");
      if (i > 0 && !(nodes_[i] > nodes_[i - 1]))
        throw DomainError("RadialProfile: nodes must be strictly increasing");
      if (!std::isfinite(values_[i])) throw DomainError("RadialProfile: values must be finite");
    }
    positive_ = std::all_of(values_.begin(), values_.end(), [](double v) { return v > 0.0; });
    log_nodes_.resize(nodes_.size());
    for (std::size_t i = 0; i < nodes_.size(); ++i) log_nodes_[i] = std::log(nodes_[i]);
    if (positive_) {
      log_values_.resize(values_.size());
      for (std::size_t i = 0; i < values_.size(); ++i) log_values_[i] = std::log(values_[i]);
    }
  }

  template <class F>
  static RadialProfile from_function(const std::vector<double>& nodes, F&& f, SingExp sing = {}) {
    std::vector<double> v(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) v[i] = f(nodes[i]);
    return RadialProfile(nodes, std::move(v), sing);
  }

  const std::vector<double>& nodes() const { return nodes_; }
  const std::vector<double>& values() const { return values_; }
  SingExp sing_exp() const { return sing_; }
  bool positive() const { return positive_; }
  std::size_t size() const { return nodes_.size(); }

  double operator()(double r) const {
    if (!(r > 0.0)) throw DomainError("RadialProfile: evaluation radius must be positive");
    const double r0 = nodes_.front();
    if (r < r0) return values_.front() * (sing_.shape(r) / sing_.shape(r0));
    if (nodes_.size() == 1) return values_.front();
    double t = std::log(r);
    std::size_t j = std::upper_bound(nodes_.begin(), nodes_.end(), r) - nodes_.begin();
    if (j == 0) j = 1;
    if (j >= nodes_.size()) j = nodes_.size() - 1;  // extrapolate last segment
    std::size_t i = j - 1;
    if (r == nodes_[i]) return values_[i];
    if (r == nodes_[j]) return values_[j];
    double th = (t - log_nodes_[i]) / (log_nodes_[j] - log_nodes_[i]);
    if (positive_) return std::exp((1.0 - th) * log_values_[i] + th * log_values_[j]);
    return (1.0 - th) * values_[i] + th * values_[j];
  }

  void write_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    out << "r,value\n";
    for (std::size_t i = 0; i < nodes_.size(); ++i)
      out << fmt_double(nodes_[i]) << ',' << fmt_double(values_[i]) << '\n';
  }

  nlohmann::ordered_json sidecar() const {
    nlohmann::ordered_json j;
    j["sing_exp"] = {sing_.a, sing_.b};
    j["interp"] = positive_ ? "loglog" : "loglinear";
    j["count"] = nodes_.size();
    return j;
  }

  void write_sidecar(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    out << sidecar().dump(2) << '\n';
  }

  static RadialProfile read(const std::string& csv_path, const std::string& json_path = "") {
    std::ifstream in(csv_path);
    if (!in) throw Error("cannot read " + csv_path);
    std::string line;
    if (!std::getline(in, line) || line != "r,value")
      throw Error(csv_path + ": expected header 'r,value'");
    std::vector<double> r, v;
    int row = 1;
    while (std::getline(in, line)) {
      ++row;
      if (line.empty()) continue;
      auto comma = line.find(',');
      if (comma == std::string::npos) throw Error(csv_path + ": malformed row " + std::to_string(row));
      try {
        r.push_back(std::stod(line.substr(0, comma)));
        v.push_back(std::stod(line.substr(comma + 1)));
      } catch (const std::exception&) {
        throw Error(csv_path + ": malformed number in row " + std::to_string(row));
      }
    }
    SingExp sing;
    if (!json_path.empty()) {
      std::ifstream js(json_path);
      if (!js) throw Error("cannot read " + json_path);
      auto j = nlohmann::json::parse(js);
      sing.a = j.at("sing_exp").at(0).get<double>();
      sing.b = j.at("sing_exp").at(1).get<double>();
    }
    return RadialProfile(std::move(r), std::move(v), sing);
  }

 private:
  std::vector<double> nodes_, values_, log_nodes_, log_values_;
  SingExp sing_;
  bool positive_ = false;
};

}  // namespace singlab
