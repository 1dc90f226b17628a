#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tseq/common.hpp"
#include "tseq/model.hpp"

namespace tseq {

inline constexpr char kCheckpointMagic[] = "TSEQ1";

inline nlohmann::ordered_json model_config_to_json(const ModelConfig& c) {
  nlohmann::ordered_json j;
  j["variant"] = to_string(c.variant);
  j["regularizer"] = to_string(c.regularizer);
  j["embedding_dim"] = c.embedding_dim;
  j["hidden_dim"] = c.hidden_dim;
  j["context_dim"] = c.context_dim;
  j["projection_dim"] = c.projection_dim;
  j["post_projection_dim"] = c.post_projection_dim;
  j["share_projection_weights"] = c.share_projection_weights;
  j["duration_head_input"] = to_string(c.duration_head_input);
  j["joint_log_input"] = c.joint_log_input;
  j["duration_head_linear"] = c.duration_head_linear;
  j["duration_target_log"] = c.duration_target_log;
  j["reg_weight"] = c.reg_weight;
  j["dropout"] = c.dropout;
  j["vocab_size"] = c.vocab_size;
  return j;
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.variant = variant_from_string(j.at("variant").get<std::string>());
  c.regularizer = regularizer_from_string(j.at("regularizer").get<std::string>());
  c.embedding_dim = j.at("embedding_dim").get<int>();
  c.hidden_dim = j.at("hidden_dim").get<int>();
  c.context_dim = j.at("context_dim").get<int>();
  c.projection_dim = j.at("projection_dim").get<int>();
  c.post_projection_dim = j.at("post_projection_dim").get<int>();
  c.share_projection_weights = j.at("share_projection_weights").get<bool>();
  c.duration_head_input = duration_head_input_from_string(j.at("duration_head_input").get<std::string>());
  c.joint_log_input = j.at("joint_log_input").get<bool>();
  c.duration_head_linear = j.at("duration_head_linear").get<bool>();
  c.duration_target_log = j.at("duration_target_log").get<bool>();
  c.reg_weight = j.at("reg_weight").get<double>();
  c.dropout = j.at("dropout").get<double>();
  c.vocab_size = j.at("vocab_size").get<int>();
  return c;
}

namespace detail {

inline void write_u32_le(std::ostream& out, std::uint32_t v) {
  unsigned char buf[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(buf), 4);
}

inline std::uint32_t read_u32_le(std::istream& in) {
  unsigned char buf[4];
  in.read(reinterpret_cast<char*>(buf), 4);
  if (!in) throw ParseError("checkpoint: truncated header length");
  return static_cast<std::uint32_t>(buf[0]) | (static_cast<std::uint32_t>(buf[1]) << 8) |
         (static_cast<std::uint32_t>(buf[2]) << 16) | (static_cast<std::uint32_t>(buf[3]) << 24);
}

inline void write_f32_le(std::ostream& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  write_u32_le(out, bits);
}

inline float read_f32_le(std::istream& in) {
  const std::uint32_t bits = read_u32_le(in);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

inline bool host_is_little_endian() {
  const std::uint32_t probe = 1;
  unsigned char byte;
  std::memcpy(&byte, &probe, 1);
  return byte == 1;
}

inline void write_f32_array(std::ostream& out, const std::vector<float>& v) {
  if (host_is_little_endian()) {
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * 4));
  } else {
    for (float x : v) write_f32_le(out, x);
  }
}

inline void read_f32_array(std::istream& in, std::vector<float>& v) {
  if (host_is_little_endian()) {
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * 4));
  } else {
    for (float& x : v) x = read_f32_le(in);
  }
}

}  // namespace detail

// Serializes the model as: magic, little-endian uint32 header length, JSON
// header (config, vocabulary, array directory, sigma), then each array as
// raw little-endian float32 in directory order.
template <class T>
void save_checkpoint(const std::string& path, const Model<T>& model, double sigma = 0.0) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint: " + path);

  nlohmann::ordered_json header;
  header["format"] = 1;
  header["config"] = model_config_to_json(model.config());
  header["vocabulary"] = model.vocab().labels();
  header["min_count"] = model.vocab().min_count();
  header["sigma"] = sigma;
  auto arrays = nlohmann::ordered_json::array();
  for (const auto& e : model.params().entries()) {
    nlohmann::ordered_json a;
    a["name"] = e.name;
    a["rows"] = e.value.rows();
    a["cols"] = e.value.cols();
    arrays.push_back(std::move(a));
  }
  header["arrays"] = std::move(arrays);

  const std::string header_str = header.dump();
  out.write(kCheckpointMagic, 5);
  detail::write_u32_le(out, static_cast<std::uint32_t>(header_str.size()));
  out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
  std::vector<float> buf;
  for (const auto& e : model.params().entries()) {
    buf.resize(e.value.size());
    for (std::size_t i = 0; i < e.value.size(); ++i) buf[i] = static_cast<float>(e.value.data()[i]);
    detail::write_f32_array(out, buf);
  }
  if (!out) throw Error("checkpoint write failed: " + path);
}

template <class T>
struct Checkpoint {
  ModelConfig config;
  Vocabulary vocab;
  double sigma = 0.0;

  Model<T> build() const { return Model<T>(config, vocab); }
};

template <class T>
Checkpoint<T> read_checkpoint_header(std::istream& in, const std::string& path) {
  char magic[5];
  in.read(magic, 5);
  if (!in || std::memcmp(magic, kCheckpointMagic, 5) != 0)
    throw ParseError(path + ": not a TSEQ1 checkpoint");
  const std::uint32_t len = detail::read_u32_le(in);
  std::string header_str(len, '\0');
  in.read(header_str.data(), static_cast<std::streamsize>(len));
  if (!in) throw ParseError(path + ": truncated checkpoint header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_str);
  } catch (const nlohmann::json::exception& ex) {
    throw ParseError(path + ": bad checkpoint header: " + ex.what());
  }
  Checkpoint<T> cp;
  cp.config = model_config_from_json(header.at("config"));
  cp.vocab = Vocabulary::from_labels(header.at("vocabulary").get<std::vector<std::string>>(),
                                     header.value("min_count", 5));
  cp.sigma = header.value("sigma", 0.0);
  return cp;
}

template <class T>
std::pair<Checkpoint<T>, Model<T>> load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open checkpoint: " + path);
  Checkpoint<T> cp = read_checkpoint_header<T>(in, path);

  // Re-read the header JSON for the array directory.
  in.seekg(5, std::ios::beg);
  const std::uint32_t len = detail::read_u32_le(in);
  std::string header_str(len, '\0');
  in.read(header_str.data(), static_cast<std::streamsize>(len));
  const nlohmann::json header = nlohmann::json::parse(header_str);

  Model<T> model = cp.build();
  const auto& arrays = header.at("arrays");
  auto& entries = model.params().entries();
  if (arrays.size() != entries.size())
    throw ParseError(path + ": checkpoint array count does not match the configuration");
  std::vector<float> buf;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& a = arrays[i];
    if (a.at("name").get<std::string>() != entries[i].name ||
        a.at("rows").get<std::size_t>() != entries[i].value.rows() ||
        a.at("cols").get<std::size_t>() != entries[i].value.cols())
      throw ParseError(path + ": checkpoint array '" + a.at("name").get<std::string>() +
                       "' does not match the expected layout");
    buf.resize(entries[i].value.size());
    detail::read_f32_array(in, buf);
    for (std::size_t j = 0; j < buf.size(); ++j)
      entries[i].value.data()[j] = static_cast<T>(buf[j]);
  }
  if (!in) throw ParseError(path + ": truncated checkpoint data");
  return {std::move(cp), std::move(model)};
}

}  // namespace tseq
