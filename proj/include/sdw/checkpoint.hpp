#pragma once

// Checkpoint file: one line of JSON text (layer shapes, step counter, parameter count)
// terminated by '\n', followed by the flat parameters as little-endian IEEE-754 doubles.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include "json.hpp"
#include "sdw/agent.hpp"

namespace sdw {

struct Checkpoint {
  AgentParams params;
  std::int64_t step = 0;
};

inline nlohmann::json checkpoint_header(const AgentParams& params, std::int64_t step) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& b : params.layout())
    layers.push_back({{"name", b.name}, {"offset", b.offset}, {"shape", {b.rows, b.cols}}});
  return {{"format", "sdw-agent"},
          {"version", 1},
          {"obs_dim", params.shape().obs_dim},
          {"hidden", params.shape().hidden},
          {"actions", params.shape().actions},
          {"step", step},
          {"count", params.size()},
          {"layers", layers}};
}

inline void write_checkpoint(std::ostream& os, const AgentParams& params, std::int64_t step) {
  os << checkpoint_header(params, step).dump() << '\n';
  for (double v : params.flat()) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
    unsigned char bytes[8];
    for (int b = 0; b < 8; ++b) bytes[b] = static_cast<unsigned char>((bits >> (8 * b)) & 0xffU);
    os.write(reinterpret_cast<const char*>(bytes), 8);
  }
  if (!os) throw std::runtime_error("write_checkpoint: stream failure");
}

inline void save_checkpoint(const std::string& path, const AgentParams& params, std::int64_t step) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  write_checkpoint(os, params, step);
}

inline Checkpoint read_checkpoint(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw UsageError("checkpoint: missing header");
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("checkpoint: bad header: ") + e.what());
  }
  if (h.value("format", "") != "sdw-agent") throw UsageError("checkpoint: not an sdw-agent file");
  NetShape shape{h.at("obs_dim").get<std::size_t>(), h.at("hidden").get<std::size_t>(),
                 h.at("actions").get<std::size_t>()};
  Checkpoint ck{AgentParams(shape), h.at("step").get<std::int64_t>()};
  if (h.at("count").get<std::size_t>() != ck.params.size()) throw UsageError("checkpoint: count/shape mismatch");
  for (double& v : ck.params.flat()) {
    unsigned char bytes[8];
    if (!is.read(reinterpret_cast<char*>(bytes), 8)) throw UsageError("checkpoint: truncated parameter data");
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(bytes[b]) << (8 * b);
    v = std::bit_cast<double>(bits);
  }
  return ck;
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw UsageError("cannot open checkpoint " + path);
  return read_checkpoint(is);
}

}  // namespace sdw
