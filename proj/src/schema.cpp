#include "hyfem/schema.hpp"

#include <numeric>

#include "hyfem/errors.hpp"

namespace hyfem::data {

FeatureSchema FeatureSchema::uniform(Eigen::Index num_blocks, Eigen::Index block_width, Eigen::Index embed_width,
                                     Eigen::Index num_classes) {
  if (num_blocks < 1) throw SchemaError("schema needs at least one block");
  FeatureSchema s;
  s.block_widths.assign(static_cast<std::size_t>(num_blocks), block_width);
  s.embed_width = embed_width;
  s.num_classes = num_classes;
  s.validate();
  return s;
}

Eigen::Index FeatureSchema::total_width() const {
  return std::accumulate(block_widths.begin(), block_widths.end(), Eigen::Index{0});
}

void FeatureSchema::validate() const {
  if (block_widths.empty()) throw SchemaError("schema needs at least one block");
  for (auto w : block_widths)
    if (w < 1) throw SchemaError("block widths must be >= 1");
  if (embed_width < 1) throw SchemaError("embed width must be >= 1");
  if (num_classes < 1) throw SchemaError("number of classes must be >= 1");
}

}  // namespace hyfem::data
