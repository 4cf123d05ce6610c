#pragma once

#include <string>

#include "espl/meta_csp.hpp"
#include "espl/sac_trainer.hpp"

namespace espl {

// On-disk bundle of everything a policy needs to be re-extracted, evaluated,
// or adapted. Arrays are stored flat with shape headers.
struct Checkpoint {
  std::string kind;  // "single" or "meta"
  std::string config_hash;
  std::uint64_t seed = 0;
  int iteration = 0;
  std::string rng_note;

  // single-task payload
  EnvKind env = EnvKind::CartPole;
  TaskParams task;
  NetworkConfig net_config;
  std::vector<SymbolicNetwork> nets;
  Mat p;
  Mlp critic1, critic2, target1, target2, std_net;
  double log_alpha = 0.0;

  // meta payload
  MetaModel meta;

  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);
};

Checkpoint checkpoint_from_result(const TrainResult& result, const TrainerConfig& config,
                                  const TaskParams& task, const std::string& config_hash);
Checkpoint checkpoint_from_meta(const MetaModel& model, const std::string& config_hash);

}  // namespace espl
