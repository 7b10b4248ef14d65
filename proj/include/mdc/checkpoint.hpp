#pragma once

#include <filesystem>
#include <nlohmann/json.hpp>

#include "mdc/nfn.hpp"

namespace mdc {

using Json = nlohmann::json;

Json arch_to_json(const jdan::JdanArch& arch);
jdan::JdanArch jdan_arch_from_json(const Json& j);
Json arch_to_json(const nfn::NfnArch& arch);
nfn::NfnArch nfn_arch_from_json(const Json& j);

struct Checkpoint {
  nfn::Nfn model;
  Json run_config;  // whatever config produced the model; may be null
};

// Parameters are stored as {shape, data} with full double precision, so a
// save/load cycle reproduces every value bit for bit.
Json checkpoint_to_json(const nfn::Nfn& model, const Json& run_config = nullptr);
Checkpoint checkpoint_from_json(const Json& j);

void save_checkpoint(const std::filesystem::path& path, const nfn::Nfn& model, const Json& run_config = nullptr);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Reads/writes a JSON file; throws std::runtime_error on I/O failure.
Json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const Json& j);

}  // namespace mdc
