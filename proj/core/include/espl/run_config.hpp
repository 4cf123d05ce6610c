#pragma once

#include <string>
#include <vector>

#include "espl/meta_csp.hpp"
#include "espl/sac_trainer.hpp"

namespace espl {

// Full run description: everything needed to replay a run lives here and is
// snapshotted into the run directory.
struct RunConfig {
  TrainerConfig trainer;
  MetaConfig meta;
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  std::string out_dir = "runs";

  static RunConfig defaults_for(EnvKind env);

  std::string to_json_text(int indent = 2) const;
  static RunConfig from_json_text(std::string_view text);
  static RunConfig load_file(const std::string& path);
  void save_file(const std::string& path) const;

  // FNV-1a over the canonical dump; ties artifacts to the exact settings
  std::string hash() const;
};

// Meta-config (de)serialization, also used by meta checkpoints.
std::string meta_config_to_json_text(const MetaConfig& config);
MetaConfig meta_config_from_json_text(std::string_view text);

}  // namespace espl
