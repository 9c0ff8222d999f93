#ifndef RUC_MODEL_STORE_HPP
#define RUC_MODEL_STORE_HPP

#include <cstdint>
#include <filesystem>
#include <string>

#include "ruc/features.hpp"
#include "ruc/network.hpp"

namespace ruc {

struct ModelProvenance {
  std::uint64_t network_seed = 0;
  std::uint64_t shuffle_seed = 0;
  std::uint64_t split_seed = 0;
  std::string dataset_variant;  // e.g. "stride2_win30"
  std::string history_digest;
};

// Serializes the network, its standardizer and provenance into a JSON
// envelope. Weight payloads are base64-encoded little-endian IEEE-754
// doubles in row-major order, so save/load round trips are bit-exact and
// repeated saves of the same model are byte-identical.
std::string save_model(const Network& net, const Standardizer& standardizer,
                       const ModelProvenance& provenance);

void save_model_file(const Network& net, const Standardizer& standardizer,
                     const ModelProvenance& provenance, const std::filesystem::path& path);

struct LoadedModel {
  Network net;
  Standardizer standardizer;
  ModelProvenance provenance;
};

// Validates format version, class order, layer shapes and payload lengths;
// the standardizer block is mandatory so deployed models cannot be applied
// with mismatched normalization statistics.
LoadedModel load_model(const std::string& artifact);

LoadedModel load_model_file(const std::filesystem::path& path);

}  // namespace ruc

#endif  // RUC_MODEL_STORE_HPP
