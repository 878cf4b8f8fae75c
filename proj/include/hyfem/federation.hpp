#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "hyfem/nn.hpp"

namespace hyfem::federation {

enum class LocalMode { Prox, Avg };

std::string to_string(LocalMode mode);
LocalMode parse_mode(const std::string& text);

struct ModelConfig {
  Eigen::Index extractor_hidden = 0;  // 0: single dense layer block -> E
  Eigen::Index head_hidden = 32;      // H_m
  Eigen::Index global_hidden = 0;     // H_0, 0 means max_m H_m
  nn::Activation embed_activation = nn::Activation::ReLU;
  // Every client starts from one shared head that also seeds theta_0.
  bool shared_head_init = false;

  void validate() const;
};

struct RoundConfig {
  std::size_t rounds = 32;          // T
  std::size_t local_steps = 32;     // Q
  std::size_t matching_passes = 8;  // P
  std::size_t batch_size = 32;
  double lr = 0.005;
  double lr_decay = 0.2;            // multiplied in every lr_period rounds
  std::size_t lr_period = 8;
  double mu = 0.1;                  // head consensus weight
  double lambda_feat = 1.0;         // extractor consensus weight
  LocalMode mode = LocalMode::Prox;
  bool fixed_matching = false;      // identity Pi_m, no Hungarian passes
  std::size_t workers = 1;

  void validate() const;
  double lr_at(std::size_t round) const;
};

}  // namespace hyfem::federation
