#include "elearn/cli/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "elearn/numerics/random.hpp"

namespace elearn::cli {

static_assert(std::endian::native == std::endian::little, "checkpoint payload assumes a little-endian host");

namespace {

std::vector<std::pair<std::string, Parameter*>> named_parameters(CheckpointData& d) {
  std::vector<std::pair<std::string, Parameter*>> out;
  for (Parameter* p : d.codebook.parameters()) out.emplace_back("stage1/" + p->name, p);
  if (d.fpe) {
    for (Parameter* p : d.fpe->parameters()) out.emplace_back("stage2/" + p->name, p);
  }
  std::map<std::string, int> seen;
  for (const auto& [name, p] : out) {
    if (seen[name]++) throw Error("checkpoint: duplicate parameter name " + name);
  }
  return out;
}

Json spec_json(const codebook::InputSpec& s) {
  return {{"kind", s.kind == StateKind::Continuous ? "continuous" : "discrete"},
          {"obs_dim", s.obs_dim},
          {"alleles_per_locus", s.alleles_per_locus}};
}

codebook::InputSpec spec_from_json(const Json& j) {
  codebook::InputSpec s;
  s.kind = j.at("kind").get<std::string>() == "continuous" ? StateKind::Continuous : StateKind::Discrete;
  s.obs_dim = j.at("obs_dim").get<std::size_t>();
  s.alleles_per_locus = j.at("alleles_per_locus").get<std::size_t>();
  return s;
}

std::string describe(const codebook::InputSpec& s) {
  return std::string(s.kind == StateKind::Continuous ? "continuous" : "discrete") + " D=" +
         std::to_string(s.input_dim());
}

}  // namespace

std::string checkpoint_bytes(CheckpointData& d) {
  const auto params = named_parameters(d);
  Json index = Json::array();
  std::size_t offset = 0;
  for (const auto& [name, p] : params) {
    index.push_back({{"name", name}, {"shape", {p->value.rows(), p->value.cols()}}, {"offset", offset}});
    offset += p->value.size() * sizeof(double);
  }
  bool frozen = true;
  for (Parameter* p : d.codebook.parameters()) frozen = frozen && !p->trainable;

  Json m;
  m["format"] = "elearn-checkpoint";
  m["version"] = kCheckpointVersion;
  m["config"] = d.config;
  m["config_hash"] = d.config_hash;
  m["seed"] = d.seed;
  m["input_spec"] = spec_json(d.codebook.spec);
  m["codebook"] = {{"K", d.codebook.K()}, {"occupancy", d.codebook.occupancy}, {"frozen", frozen}};
  if (d.fpe) {
    const auto& lg = d.fpe->graph;
    const auto& o = d.fpe->opts;
    Json edges = Json::array();
    for (const auto& [i, j] : lg.graph.undirected_edges()) edges.push_back({i, j});
    m["landscape"] = {{"codewords", lg.codewords},
                      {"occupancy", lg.occupancy},
                      {"edges", edges},
                      {"n_int", o.n_int},
                      {"horizon", o.horizon},
                      {"sigmoid_scale", o.sigmoid_scale},
                      {"smoothing", o.smoothing},
                      {"bypass_phi_psi", o.bypass_phi_psi},
                      {"serial_kernels", o.serial_kernels}};
  } else {
    m["landscape"] = nullptr;
  }
  m["parameters"] = index;
  m["payload_bytes"] = offset;

  const std::string manifest = m.dump();
  std::string out(kCheckpointMagic, 8);
  const std::uint64_t len = manifest.size();
  out.append(reinterpret_cast<const char*>(&len), sizeof len);
  out += manifest;
  for (const auto& [name, p] : params) {
    out.append(reinterpret_cast<const char*>(p->value.data()), p->value.size() * sizeof(double));
  }
  return out;
}

void save_checkpoint(const std::filesystem::path& path, CheckpointData& d) {
  const std::string bytes = checkpoint_bytes(d);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing checkpoint " + path.string());
}

CheckpointData parse_checkpoint(const std::string& bytes) {
  if (bytes.size() < 16 || bytes.compare(0, 8, kCheckpointMagic) != 0) {
    throw Error("checkpoint: bad magic (not an elearn checkpoint)");
  }
  std::uint64_t len = 0;
  std::memcpy(&len, bytes.data() + 8, sizeof len);
  if (len > bytes.size() - 16) throw Error("checkpoint: truncated manifest");
  Json m;
  try {
    m = Json::parse(bytes.substr(16, len));
  } catch (const std::exception& e) {
    throw Error(std::string("checkpoint: unreadable manifest: ") + e.what());
  }
  if (m.value("format", "") != "elearn-checkpoint" || m.value("version", -1) != kCheckpointVersion) {
    throw Error("checkpoint: unsupported version (expected elearn-checkpoint v" +
                std::to_string(kCheckpointVersion) + ")");
  }
  const std::size_t payload_start = 16 + len;
  const std::size_t payload_bytes = m.at("payload_bytes").get<std::size_t>();
  if (bytes.size() - payload_start != payload_bytes) throw Error("checkpoint: payload size does not match manifest");

  CheckpointData d;
  d.config = m.at("config");
  d.config_hash = m.at("config_hash").get<std::string>();
  d.seed = m.at("seed").get<std::uint64_t>();
  const codebook::InputSpec spec = spec_from_json(m.at("input_spec"));
  auto rng = stream_rng(0, 0);
  const std::size_t K = m.at("codebook").at("K").get<std::size_t>();
  d.codebook = codebook::CodebookModel(spec, K, rng);
  d.codebook.occupancy = m.at("codebook").at("occupancy").get<std::vector<std::size_t>>();
  if (d.codebook.occupancy.size() != K) throw Error("checkpoint: occupancy length differs from K");

  const Json& L = m.at("landscape");
  if (!L.is_null()) {
    landscape::LandscapeGraph lg;
    const auto cws = L.at("codewords").get<std::vector<std::int64_t>>();
    std::vector<std::pair<std::int64_t, std::int64_t>> edges;
    for (const Json& e : L.at("edges")) edges.emplace_back(e.at(0).get<std::int64_t>(), e.at(1).get<std::int64_t>());
    lg.graph = landscape::Graph::from_edges(cws.size(), edges);
    lg.codewords = cws;
    lg.node_of.assign(K, -1);
    for (std::size_t i = 0; i < cws.size(); ++i) {
      if (cws[i] < 0 || static_cast<std::size_t>(cws[i]) >= K) throw Error("checkpoint: node codeword out of range");
      lg.node_of[static_cast<std::size_t>(cws[i])] = static_cast<std::int64_t>(i);
    }
    lg.occupancy = L.at("occupancy").get<std::vector<std::size_t>>();
    lg.n_components = lg.graph.n_components();
    landscape::FpeOptions o;
    o.n_int = L.at("n_int").get<std::size_t>();
    o.horizon = L.at("horizon").get<double>();
    o.sigmoid_scale = L.at("sigmoid_scale").get<double>();
    o.smoothing = L.at("smoothing").get<double>();
    o.bypass_phi_psi = L.at("bypass_phi_psi").get<bool>();
    o.serial_kernels = L.at("serial_kernels").get<bool>();
    // Node codeword vectors are filled from the stored codebook below.
    d.fpe.emplace(std::move(lg), Tensor(cws.size(), codebook::kCodeDim), o, rng);
  }

  const auto params = named_parameters(d);
  const Json& index = m.at("parameters");
  if (index.size() != params.size()) {
    throw Error("checkpoint: manifest lists " + std::to_string(index.size()) + " parameters, model expects " +
                std::to_string(params.size()));
  }
  std::size_t expected_offset = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& [name, p] = params[i];
    const Json& entry = index[i];
    const auto rows = entry.at("shape").at(0).get<std::size_t>();
    const auto cols = entry.at("shape").at(1).get<std::size_t>();
    if (entry.at("name").get<std::string>() != name) {
      throw Error("checkpoint: expected parameter " + name + ", found " + entry.at("name").get<std::string>());
    }
    if (rows != p->value.rows() || cols != p->value.cols()) {
      throw Error("checkpoint: parameter " + name + " expected shape " + shape_string(p->value.rows(), p->value.cols()) +
                  ", found " + shape_string(rows, cols));
    }
    if (entry.at("offset").get<std::size_t>() != expected_offset) throw Error("checkpoint: offsets do not tile the payload");
    std::memcpy(p->value.data(), bytes.data() + payload_start + expected_offset, p->value.size() * sizeof(double));
    expected_offset += p->value.size() * sizeof(double);
  }
  if (expected_offset != payload_bytes) throw Error("checkpoint: offsets do not tile the payload");

  if (d.fpe) {
    for (std::size_t i = 0; i < d.fpe->n(); ++i) {
      const auto src = d.codebook.codewords.value.row(static_cast<std::size_t>(d.fpe->graph.codewords[i]));
      std::copy(src.begin(), src.end(), d.fpe->codewords.row(i).begin());
    }
  }
  if (m.at("codebook").at("frozen").get<bool>()) {
    for (Parameter* p : d.codebook.parameters()) p->trainable = false;
  }
  return d;
}

CheckpointData load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_checkpoint(ss.str());
}

codebook::CodebookModel import_frozen(const std::filesystem::path& path, const codebook::InputSpec& expected) {
  CheckpointData d = load_checkpoint(path);
  const auto& found = d.codebook.spec;
  if (found.kind != expected.kind || found.input_dim() != expected.input_dim() ||
      found.obs_dim != expected.obs_dim) {
    throw Error("import_frozen: input layout mismatch, expected " + describe(expected) + ", found " +
                describe(found));
  }
  for (Parameter* p : d.codebook.parameters()) p->trainable = false;
  return std::move(d.codebook);
}

}  // namespace elearn::cli
