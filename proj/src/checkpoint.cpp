#include "mdc/checkpoint.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "mdc/error.hpp"

namespace mdc {

Json arch_to_json(const jdan::JdanArch& arch) {
  return Json{{"n_vars", arch.n_vars},
              {"n_components", arch.n_components},
              {"n_blocks", arch.n_blocks},
              {"width", arch.width},
              {"coupling", jdan::to_string(arch.coupling)},
              {"location", arch.location},
              {"scale", arch.scale}};
}

jdan::JdanArch jdan_arch_from_json(const Json& j) {
  jdan::JdanArch a;
  a.n_vars = j.at("n_vars").get<std::size_t>();
  a.n_components = j.at("n_components").get<std::size_t>();
  a.n_blocks = j.at("n_blocks").get<std::size_t>();
  a.width = j.at("width").get<std::size_t>();
  a.coupling = jdan::coupling_from_string(j.at("coupling").get<std::string>());
  a.location = j.value("location", std::vector<double>{});
  a.scale = j.value("scale", std::vector<double>{});
  a.validate();
  return a;
}

Json arch_to_json(const nfn::NfnArch& arch) {
  return Json{{"n_blocks", arch.n_blocks},
              {"width", arch.width},
              {"n_features", arch.n_features},
              {"window", arch.window},
              {"jdan", arch_to_json(arch.jdan)}};
}

nfn::NfnArch nfn_arch_from_json(const Json& j) {
  nfn::NfnArch a;
  a.n_blocks = j.at("n_blocks").get<std::size_t>();
  a.width = j.at("width").get<std::size_t>();
  a.n_features = j.at("n_features").get<std::size_t>();
  a.window = j.at("window").get<std::size_t>();
  a.jdan = jdan_arch_from_json(j.at("jdan"));
  a.validate();
  return a;
}

Json checkpoint_to_json(const nfn::Nfn& model, const Json& run_config) {
  Json params = Json::object();
  for (const auto& p : model.parameters())
    params[p.name] = Json{{"shape", p.tensor->shape()}, {"data", p.tensor->data()}};
  const auto& bn = model.bn_state();
  return Json{{"format", "mdc-checkpoint/1"},
              {"arch", arch_to_json(model.arch())},
              {"seed", model.seed()},
              {"parameters", std::move(params)},
              {"batch_norm",
               {{"running_mean", bn.running_mean},
                {"running_var", bn.running_var},
                {"momentum", bn.momentum},
                {"epsilon", bn.epsilon},
                {"initialized", bn.initialized}}},
              {"run_config", run_config}};
}

namespace {

Checkpoint parse_checkpoint(const Json& j) {
  if (j.value("format", std::string{}) != "mdc-checkpoint/1") throw ConfigError("not an mdc checkpoint");
  nfn::Nfn model(nfn_arch_from_json(j.at("arch")), j.at("seed").get<std::uint64_t>());
  const Json& params = j.at("parameters");
  if (params.size() != model.parameters().size())
    throw ConfigError("checkpoint has " + std::to_string(params.size()) + " parameter tensors, architecture needs " +
                      std::to_string(model.parameters().size()));
  for (auto& p : model.parameters()) {
    if (!params.contains(p.name)) throw ConfigError("checkpoint is missing parameter " + p.name);
    const Json& entry = params.at(p.name);
    ad::Tensor t(entry.at("shape").get<ad::Shape>(), entry.at("data").get<std::vector<double>>());
    if (!t.same_shape(*p.tensor))
      throw ConfigError("parameter " + p.name + " has shape " + ad::shape_string(t.shape()) + ", expected " +
                        ad::shape_string(p.tensor->shape()));
    *p.tensor = std::move(t);
  }
  const Json& bn = j.at("batch_norm");
  auto& st = model.bn_state();
  st.running_mean = bn.at("running_mean").get<std::vector<double>>();
  st.running_var = bn.at("running_var").get<std::vector<double>>();
  st.momentum = bn.at("momentum").get<double>();
  st.epsilon = bn.at("epsilon").get<double>();
  st.initialized = bn.at("initialized").get<bool>();
  if (st.running_mean.size() != model.arch().width || st.running_var.size() != model.arch().width)
    throw ConfigError("batch norm statistics do not match the network width");
  for (double v : st.running_var)
    if (!(v >= 0.0)) throw ConfigError("negative running variance in checkpoint");
  return {std::move(model), j.value("run_config", Json(nullptr))};
}

}  // namespace

Checkpoint checkpoint_from_json(const Json& j) {
  try {
    return parse_checkpoint(j);
  } catch (const ConfigError&) {
    throw;
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("malformed checkpoint: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("invalid checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const nfn::Nfn& model, const Json& run_config) {
  write_json_file(path, checkpoint_to_json(model, run_config));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return checkpoint_from_json(read_json_file(path)); }

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const Json& j) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace mdc
