#pragma once

// Reasoning-result cache: one self-describing JSON file per key so repeated
// designs of the same amplifier retrieve their derived targets directly.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ampsizer/reasoning.hpp"

namespace ampsizer {

class ReasoningCache {
 public:
  // Default directory: $AMPSIZER_CACHE_DIR, else $HOME/.cache/ampsizer,
  // else ./.ampsizer-cache.
  static std::filesystem::path default_dir();

  explicit ReasoningCache(std::filesystem::path dir = default_dir());

  // Canonical key: descriptor name plus the spec fields rounded to 4
  // significant figures, so float formatting noise cannot cause misses.
  static std::string make_key(const std::string& descriptor_name, const DesignSpec& spec);

  // Miss is an empty optional, not an error.
  std::optional<DerivedTargets> get(const std::string& key) const;
  // Throws StorageError when the cache directory is unwritable.
  void put(const std::string& key, const DerivedTargets& targets) const;

  std::vector<std::string> list() const;
  void clear() const;
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
};

// Serialization used by the cache files (and reusable for reports);
// round-trips doubles exactly.
std::string serialize_targets(const DerivedTargets& targets);
DerivedTargets parse_targets(const std::string& json_text);

}  // namespace ampsizer
