#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include <json.hpp>

namespace ec4srec::ckpt {

// Self-describing binary container: magic + version + a JSON header listing
// named arrays, followed by their raw doubles in header order. The JSON dump
// is canonical (sorted keys, fixed layout), so identical contents produce
// byte-identical files.
struct Container {
  nlohmann::json meta;  // arbitrary metadata; "arrays" is reserved
  std::vector<std::pair<std::string, Eigen::MatrixXd>> arrays;

  const Eigen::MatrixXd& array(const std::string& name) const;
  bool has_array(const std::string& name) const;
};

void save(const Container& c, const std::string& path);
Container load(const std::string& path);

}  // namespace ec4srec::ckpt
