#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace gumbolt {

struct VerifyEntry {
  std::string suite;
  std::string name;
  bool passed = false;
  std::string detail;
};

struct VerifyReport {
  std::vector<VerifyEntry> entries;

  bool passed() const;
  /// One "PASS|FAIL suite/name: detail" line per entry and a summary line.
  std::string text() const;
};

/// Scope is "all", "theorems", "grad" or "logz".
VerifyReport verify(const std::string& scope, std::uint64_t seed = 1);

VerifyReport verify_theorems(std::uint64_t seed);
VerifyReport verify_gradients(std::uint64_t seed);
VerifyReport verify_log_z(std::uint64_t seed);

}  // namespace gumbolt
