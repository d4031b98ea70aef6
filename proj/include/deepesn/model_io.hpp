#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "deepesn/errors.hpp"
#include "deepesn/stack.hpp"

namespace deepesn {

// Model container: "DESN" magic, uint32 little-endian header length, a JSON
// header (schema_version, config echo, matrix directory), then all matrices
// concatenated as row-major little-endian float64. Byte layout is documented
// in the README.

static_assert(std::endian::native == std::endian::little,
              "model files are little-endian; big-endian hosts are not supported");

inline constexpr int kModelSchemaVersion = 1;
inline constexpr char kModelMagic[4] = {'D', 'E', 'S', 'N'};

inline void to_json(nlohmann::json& j, const ReservoirParams& p) {
  j = {{"size", p.size},           {"input_dim", p.input_dim},
       {"input_scaling", p.input_scaling}, {"spectral_radius", p.spectral_radius},
       {"leak_rate", p.leak_rate}, {"sparsity", p.sparsity},
       {"seed", p.seed}};
}

inline void from_json(const nlohmann::json& j, ReservoirParams& p) {
  j.at("size").get_to(p.size);
  j.at("input_dim").get_to(p.input_dim);
  j.at("input_scaling").get_to(p.input_scaling);
  j.at("spectral_radius").get_to(p.spectral_radius);
  j.at("leak_rate").get_to(p.leak_rate);
  j.at("sparsity").get_to(p.sparsity);
  j.at("seed").get_to(p.seed);
}

inline void to_json(nlohmann::json& j, const EncoderSpec& s) {
  j = {{"kind", to_string(s.kind)},
       {"input_dim", s.input_dim},
       {"output_dim", s.output_dim},
       {"ridge_lambda", s.ridge_lambda},
       {"seed", s.seed}};
}

inline void from_json(const nlohmann::json& j, EncoderSpec& s) {
  s.kind = encoder_kind_from_string(j.at("kind").get<std::string>());
  j.at("input_dim").get_to(s.input_dim);
  j.at("output_dim").get_to(s.output_dim);
  j.at("ridge_lambda").get_to(s.ridge_lambda);
  j.at("seed").get_to(s.seed);
}

inline void to_json(nlohmann::json& j, const DeepEsnConfig& c) {
  j = {{"layers", c.layers},
       {"encoders", c.encoders},
       {"feature_links", c.feature_links},
       {"direct_input", c.direct_input},
       {"ridge_beta", c.ridge_beta},
       {"washout", c.washout}};
}

inline void from_json(const nlohmann::json& j, DeepEsnConfig& c) {
  c.layers = j.at("layers").get<std::vector<ReservoirParams>>();
  c.encoders = j.at("encoders").get<std::vector<EncoderSpec>>();
  j.at("feature_links").get_to(c.feature_links);
  j.at("direct_input").get_to(c.direct_input);
  j.at("ridge_beta").get_to(c.ridge_beta);
  j.at("washout").get_to(c.washout);
}

namespace detail {

struct MatrixEntry {
  std::string name;
  const Eigen::MatrixXd* matrix;
};

inline void append_row_major(std::vector<double>& payload, const Eigen::MatrixXd& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) payload.push_back(m(i, j));
}

inline Eigen::MatrixXd read_row_major(const std::vector<double>& payload, std::size_t offset,
                                      Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j)
      m(i, j) = payload[offset + static_cast<std::size_t>(i * cols + j)];
  return m;
}

}  // namespace detail

inline void save_model(const DeepEsnModel& model, const std::filesystem::path& path) {
  std::vector<std::pair<std::string, Eigen::MatrixXd>> matrices;
  for (std::size_t i = 0; i < model.reservoirs().size(); ++i) {
    matrices.emplace_back("w_in." + std::to_string(i), model.reservoirs()[i].input_weights());
    matrices.emplace_back("w_res." + std::to_string(i),
                          model.reservoirs()[i].recurrent_weights_dense());
  }
  for (std::size_t j = 0; j < model.encoders().size(); ++j) {
    matrices.emplace_back("enc_w." + std::to_string(j), model.encoders()[j].weights());
    matrices.emplace_back("enc_mu." + std::to_string(j),
                          Eigen::MatrixXd(model.encoders()[j].mean().transpose()));
  }
  if (model.trained()) matrices.emplace_back("w_out", model.readout());

  nlohmann::json dir = nlohmann::json::array();
  std::vector<double> payload;
  for (const auto& [name, m] : matrices) {
    dir.push_back({{"name", name},
                   {"rows", m.rows()},
                   {"cols", m.cols()},
                   {"offset", payload.size()}});
    detail::append_row_major(payload, m);
  }

  nlohmann::json header = {{"schema_version", kModelSchemaVersion},
                           {"config", model.config()},
                           {"trained", model.trained()},
                           {"fitted_encoders", model.encoders().size()},
                           {"matrices", dir}};
  const std::string header_str = header.dump();

  // write-temp-then-rename so a crash never leaves a half-written model
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out.write(kModelMagic, 4);
    const std::uint32_t len = static_cast<std::uint32_t>(header_str.size());
    out.write(reinterpret_cast<const char*>(&len), 4);
    out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
    out.write(reinterpret_cast<const char*>(payload.data()),
              static_cast<std::streamsize>(payload.size() * sizeof(double)));
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline DeepEsnModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (bytes.size() < 8 || std::memcmp(bytes.data(), kModelMagic, 4) != 0)
    throw CorruptFileError(path.string() + ": not a model file (bad magic)");
  std::uint32_t header_len = 0;
  std::memcpy(&header_len, bytes.data() + 4, 4);
  if (bytes.size() < 8ull + header_len)
    throw CorruptFileError(path.string() + ": truncated header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + 8, bytes.begin() + 8 + header_len);
  } catch (const nlohmann::json::exception& e) {
    throw CorruptFileError(path.string() + ": unreadable header: " + e.what());
  }

  const int version = header.value("schema_version", -1);
  if (version != kModelSchemaVersion)
    throw VersionError(path.string() + ": schema_version " + std::to_string(version) +
                       " not supported (expected " + std::to_string(kModelSchemaVersion) + ")");

  DeepEsnConfig config;
  std::vector<double> payload;
  try {
    config = header.at("config").get<DeepEsnConfig>();

    const std::size_t payload_bytes = bytes.size() - 8 - header_len;
    if (payload_bytes % sizeof(double) != 0)
      throw CorruptFileError(path.string() + ": payload is not a whole number of float64");
    payload.resize(payload_bytes / sizeof(double));
    std::memcpy(payload.data(), bytes.data() + 8 + header_len, payload_bytes);

    std::size_t expected = 0;
    for (const auto& e : header.at("matrices"))
      expected += e.at("rows").get<std::size_t>() * e.at("cols").get<std::size_t>();
    if (expected != payload.size())
      throw CorruptFileError(path.string() + ": payload size mismatch (truncated?)");
  } catch (const nlohmann::json::exception& e) {
    throw CorruptFileError(path.string() + ": malformed header: " + e.what());
  }

  auto fetch = [&](const std::string& name) -> Eigen::MatrixXd {
    for (const auto& e : header.at("matrices")) {
      if (e.at("name").get<std::string>() == name) {
        return detail::read_row_major(payload, e.at("offset").get<std::size_t>(),
                                      e.at("rows").get<Eigen::Index>(),
                                      e.at("cols").get<Eigen::Index>());
      }
    }
    throw CorruptFileError(path.string() + ": missing matrix " + name);
  };

  std::vector<ReservoirLayer> reservoirs;
  for (std::size_t i = 0; i < config.layers.size(); ++i)
    reservoirs.emplace_back(config.layers[i], fetch("w_in." + std::to_string(i)),
                            fetch("w_res." + std::to_string(i)));

  std::vector<FittedEncoder> encoders;
  const std::size_t fitted = header.value("fitted_encoders", config.encoders.size());
  for (std::size_t j = 0; j < fitted; ++j)
    encoders.emplace_back(config.encoders[j], fetch("enc_w." + std::to_string(j)),
                          fetch("enc_mu." + std::to_string(j)).transpose());

  std::optional<Eigen::MatrixXd> readout;
  if (header.value("trained", false)) readout = fetch("w_out");

  return DeepEsnModel(std::move(config), std::move(reservoirs), std::move(encoders),
                      std::move(readout));
}

}  // namespace deepesn
