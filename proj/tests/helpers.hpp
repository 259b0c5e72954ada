#pragma once

#include <atomic>
#include <filesystem>
#include <string>
#include <unistd.h>

#include "psmatch/dataset.hpp"

namespace th {

inline std::string temp_dir() {
  static std::atomic<int> counter{0};
  const auto dir = std::filesystem::temp_directory_path() /
                   ("psmatch_test_" + std::to_string(::getpid()) + "_" +
                    std::to_string(counter++));
  std::filesystem::create_directories(dir);
  return dir.string();
}

struct TempDir {
  std::filesystem::path path = temp_dir();
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::string file(const std::string& name) const {
    return (path / name).string();
  }
};

// 10 rows, one covariate of each kind. Values chosen so per-arm moments are
// easy to verify by hand.
inline psmatch::ObservationTable small_table() {
  using namespace psmatch;
  ObservationTable t;
  t.schema.treatment = "z";
  t.schema.outcome = "y";
  t.schema.covariates = {
      {"x", VariableKind::continuous, {}},
      {"flag", VariableKind::binary, {}},
      {"pos", VariableKind::categorical, {"a", "b", "c"}},
  };
  t.z = {0, 1, 0, 1, 0, 1, 0, 1, 0, 1};
  t.y = {1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0};
  CovariateColumn x;
  x.spec = t.schema.covariates[0];
  x.numeric = {1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0};
  CovariateColumn flag;
  flag.spec = t.schema.covariates[1];
  flag.numeric = {0, 1, 0, 0, 1, 1, 0, 1, 0, 1};
  CovariateColumn pos;
  pos.spec = t.schema.covariates[2];
  pos.level = {0, 1, 2, 0, 1, 2, 0, 1, 2, 0};
  t.covariates = {x, flag, pos};
  return t;
}

}  // namespace th
