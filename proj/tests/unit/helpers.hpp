#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "risksea/txgraph.hpp"

namespace testutil {

// Self-cleaning scratch directory under the system temp root.
class TempDir {
  public:
    TempDir() {
        static std::atomic<int> counter{0};
        auto base = std::filesystem::temp_directory_path();
        path_ = base / ("risksea_test_" + std::to_string(::getpid()) + "_" +
                        std::to_string(counter.fetch_add(1)));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }

  private:
    std::filesystem::path path_;
};

inline risksea::TransactionRecord tx(int64_t ts, std::string from, std::string to,
                                     double amount = 1.0) {
    risksea::TransactionRecord r;
    r.timestamp = ts;
    r.from_addr = std::move(from);
    r.to_addr = std::move(to);
    r.amount = amount;
    r.asset = {risksea::AssetKind::Native, {}};
    return r;
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

}  // namespace testutil
