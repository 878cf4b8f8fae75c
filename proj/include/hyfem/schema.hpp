#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <vector>

namespace hyfem::data {

// Global feature-block layout shared by every client and the server.
struct FeatureSchema {
  std::vector<Eigen::Index> block_widths;  // one entry per block, D = size()
  Eigen::Index embed_width = 1;            // E, extractor output width
  Eigen::Index num_classes = 2;            // C

  static FeatureSchema uniform(Eigen::Index num_blocks, Eigen::Index block_width, Eigen::Index embed_width,
                               Eigen::Index num_classes);

  std::size_t num_blocks() const { return block_widths.size(); }
  Eigen::Index total_width() const;
  Eigen::Index embedding_width() const { return static_cast<Eigen::Index>(num_blocks()) * embed_width; }
  void validate() const;
};

}  // namespace hyfem::data
