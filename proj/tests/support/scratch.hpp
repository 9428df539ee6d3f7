#pragma once

#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>

#include "drbl/data_prep.hpp"

// Per-test directory under the system temp dir, removed afterwards.
class ScratchDir {
 public:
  ScratchDir() {
    std::string tag = "drbl";
#ifdef GTEST_INCLUDE_GTEST_GTEST_H_
    if (const auto* info = ::testing::UnitTest::GetInstance()->current_test_info()) {
      tag = std::string(info->test_suite_name()) + "." + info->name();
    }
#endif
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("drbl_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

  std::filesystem::path write(const std::string& name, const std::string& contents) const {
    const auto p = path_ / name;
    std::ofstream(p, std::ios::binary) << contents;
    return p;
  }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::filesystem::path test_data(const std::string& name) {
  return std::filesystem::path(DRBL_TEST_DATA) / name;
}

inline drbl::SentencePair make_pair(const std::string& premise, const std::string& hypothesis,
                                    drbl::Label label = drbl::Label::entailment,
                                    const std::string& id = "") {
  return {id, drbl::tokenize(premise), drbl::tokenize(hypothesis), label};
}
