// Copyright 2026  The svsd Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>

#include "svsd/error.hpp"
#include "svsd/json_io.hpp"
#include "svsd/model.hpp"

namespace svsd {
namespace {

constexpr char kMagic[8] = {'S', 'V', 'S', 'D', 'C', 'K', 'P', 'T'};
constexpr int kFormatVersion = 1;

struct ArrayRef {
  std::string name;
  std::vector<int> shape;
  std::vector<float> values;
};

void AppendFloats(std::vector<unsigned char> &blob, const std::vector<float> &v) {
  for (float x : v) {
    std::uint32_t bits;
    std::memcpy(&bits, &x, sizeof bits);
    for (int i = 0; i < 4; ++i) blob.push_back((bits >> (8 * i)) & 0xff);
  }
}

std::vector<float> ReadFloats(const unsigned char *p, std::size_t count) {
  std::vector<float> v(count);
  for (std::size_t k = 0; k < count; ++k) {
    std::uint32_t bits = 0;
    for (int i = 0; i < 4; ++i)
      bits |= static_cast<std::uint32_t>(p[4 * k + i]) << (8 * i);
    std::memcpy(&v[k], &bits, sizeof bits);
  }
  return v;
}

template <typename V>
std::vector<float> ToFloat(const V &v) {
  return std::vector<float>(v.begin(), v.end());
}

std::string ShapeString(const std::vector<int> &s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i)
    out += (i ? "x" : "") + std::to_string(s[i]);
  return out;
}

}  // namespace

nlohmann::json to_json(const NetworkConfig &c) {
  return {{"base_channels", c.base_channels}, {"depth", c.depth},
          {"input_frames", c.input_frames},   {"fft_bins", c.fft_bins},
          {"padded_bins", c.padded_bins},     {"num_sources", c.num_sources},
          {"leaky_slope", c.leaky_slope}};
}

NetworkConfig network_config_from_json(const nlohmann::json &j) {
  NetworkConfig c;
  c.base_channels = j.value("base_channels", c.base_channels);
  c.depth = j.value("depth", c.depth);
  c.input_frames = j.value("input_frames", c.input_frames);
  c.fft_bins = j.value("fft_bins", c.fft_bins);
  c.padded_bins = j.value("padded_bins", c.padded_bins);
  c.num_sources = j.value("num_sources", c.num_sources);
  c.leaky_slope = j.value("leaky_slope", c.leaky_slope);
  return c;
}

std::vector<ParamSlot> parameter_slots(ParameterSet<float> &params,
                                       const ParamGrads &grads,
                                       const std::vector<double> &log_sigma_grad) {
  Require(grads.size() == params.layers.size() && log_sigma_grad.size() == 1,
          ErrorCode::kShape, "parameter_slots: gradient layout mismatch");
  std::vector<ParamSlot> slots;
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    auto &l = params.layers[i];
    slots.push_back({l.name + ".kernel", l.kernel, {}, grads[i].kernel});
    slots.push_back({l.name + ".bias", l.bias, {}, grads[i].bias});
  }
  slots.push_back({"log_sigma", {}, std::span<double>(&params.log_sigma, 1),
                   log_sigma_grad});
  return slots;
}

void save_checkpoint(const std::filesystem::path &path, const Checkpoint &ckpt) {
  const auto &ps = ckpt.params;
  std::vector<ArrayRef> arrays;
  for (const auto &l : ps.layers) {
    arrays.push_back({l.name + ".kernel", {l.kh, l.kw, l.cin, l.cout}, l.kernel});
    arrays.push_back({l.name + ".bias", {l.cout}, l.bias});
  }
  // Moments follow the canonical slot order of parameter_slots().
  std::vector<std::string> slot_names;
  for (const auto &l : ps.layers) {
    slot_names.push_back(l.name + ".kernel");
    slot_names.push_back(l.name + ".bias");
  }
  slot_names.push_back("log_sigma");
  const auto &adam = ckpt.adam;
  if (!adam.first_moment.empty()) {
    Require(adam.first_moment.size() == slot_names.size(), ErrorCode::kShape,
            "save_checkpoint: optimiser state does not match the parameters");
    for (std::size_t k = 0; k < slot_names.size(); ++k) {
      const int n = static_cast<int>(adam.first_moment[k].size());
      arrays.push_back({"adam.m/" + slot_names[k], {n}, ToFloat(adam.first_moment[k])});
      arrays.push_back({"adam.v/" + slot_names[k], {n}, ToFloat(adam.second_moment[k])});
    }
  }

  nlohmann::json manifest;
  manifest["format"] = "svsd-checkpoint";
  manifest["version"] = kFormatVersion;
  manifest["config"] = to_json(ps.config);
  manifest["seed"] = ps.seed;
  manifest["iteration"] = ckpt.iteration;
  manifest["log_sigma"] = ps.log_sigma;
  manifest["adam"] = {{"step_count", adam.step_count},
                      {"learning_rate", adam.config.learning_rate},
                      {"beta1", adam.config.beta1},
                      {"beta2", adam.config.beta2},
                      {"epsilon", adam.config.epsilon}};
  std::vector<unsigned char> blob;
  nlohmann::json entries = nlohmann::json::array();
  for (const auto &a : arrays) {
    entries.push_back({{"name", a.name},
                       {"shape", a.shape},
                       {"offset", blob.size()},
                       {"count", a.values.size()}});
    AppendFloats(blob, a.values);
  }
  manifest["arrays"] = entries;

  const std::string text = manifest.dump();
  std::ofstream os(path, std::ios::binary);
  if (!os) Fail(ErrorCode::kIo, "cannot write checkpoint " + path.string());
  os.write(kMagic, sizeof kMagic);
  const std::uint64_t len = text.size();
  for (int i = 0; i < 8; ++i) os.put(static_cast<char>((len >> (8 * i)) & 0xff));
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  os.write(reinterpret_cast<const char *>(blob.data()),
           static_cast<std::streamsize>(blob.size()));
  if (!os) Fail(ErrorCode::kIo, "write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorCode::kIo, "cannot open checkpoint " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  const std::string name = path.string();
  Require(bytes.size() >= 16 && std::memcmp(bytes.data(), kMagic, 8) == 0,
          ErrorCode::kFormat, name + ": not an svsd checkpoint");
  std::uint64_t len = 0;
  for (int i = 0; i < 8; ++i) len |= static_cast<std::uint64_t>(bytes[8 + i]) << (8 * i);
  Require(16 + len <= bytes.size(), ErrorCode::kFormat, name + ": truncated manifest");
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(bytes.begin() + 16, bytes.begin() + 16 + len);
  } catch (const nlohmann::json::exception &e) {
    Fail(ErrorCode::kFormat, name + ": bad manifest: " + e.what());
  }
  const unsigned char *blob = bytes.data() + 16 + len;
  const std::size_t blob_size = bytes.size() - 16 - len;

  Checkpoint ckpt;
  try {
    Require(manifest.at("version").get<int>() == kFormatVersion, ErrorCode::kFormat,
            name + ": unsupported checkpoint version");
    const NetworkConfig config = network_config_from_json(manifest.at("config"));
    ckpt.params = build<float>(config, manifest.at("seed").get<std::uint64_t>());
    ckpt.params.log_sigma = manifest.at("log_sigma").get<double>();
    ckpt.iteration = manifest.at("iteration").get<long>();
    const auto &a = manifest.at("adam");
    ckpt.adam.step_count = a.at("step_count").get<long>();
    ckpt.adam.config.learning_rate = a.at("learning_rate").get<double>();
    ckpt.adam.config.beta1 = a.at("beta1").get<double>();
    ckpt.adam.config.beta2 = a.at("beta2").get<double>();
    ckpt.adam.config.epsilon = a.at("epsilon").get<double>();

    std::map<std::string, std::pair<std::vector<int>, std::vector<float>>> arrays;
    for (const auto &e : manifest.at("arrays")) {
      const auto offset = e.at("offset").get<std::size_t>();
      const auto count = e.at("count").get<std::size_t>();
      Require(offset + 4 * count <= blob_size, ErrorCode::kFormat,
              name + ": array '" + e.at("name").get<std::string>() +
                  "' exceeds the file");
      arrays[e.at("name").get<std::string>()] = {
          e.at("shape").get<std::vector<int>>(), ReadFloats(blob + offset, count)};
    }

    auto take = [&](const std::string &key, const std::vector<int> &expected,
                    std::vector<float> &dst) {
      auto it = arrays.find(key);
      Require(it != arrays.end(), ErrorCode::kFormat,
              name + ": missing array '" + key + "'");
      Require(it->second.first == expected, ErrorCode::kShape,
              name + ": array '" + key + "' has shape " +
                  ShapeString(it->second.first) + " but the configuration needs " +
                  ShapeString(expected));
      dst = std::move(it->second.second);
    };
    std::vector<std::string> slot_names;
    std::vector<std::size_t> slot_sizes;
    for (auto &l : ckpt.params.layers) {
      take(l.name + ".kernel", {l.kh, l.kw, l.cin, l.cout}, l.kernel);
      take(l.name + ".bias", {l.cout}, l.bias);
      slot_names.push_back(l.name + ".kernel");
      slot_sizes.push_back(l.kernel.size());
      slot_names.push_back(l.name + ".bias");
      slot_sizes.push_back(l.bias.size());
    }
    slot_names.push_back("log_sigma");
    slot_sizes.push_back(1);
    if (arrays.count("adam.m/" + slot_names.front())) {
      for (std::size_t k = 0; k < slot_names.size(); ++k) {
        const std::vector<int> shape{static_cast<int>(slot_sizes[k])};
        std::vector<float> m, v;
        take("adam.m/" + slot_names[k], shape, m);
        take("adam.v/" + slot_names[k], shape, v);
        ckpt.adam.first_moment.emplace_back(m.begin(), m.end());
        ckpt.adam.second_moment.emplace_back(v.begin(), v.end());
      }
    }
  } catch (const nlohmann::json::exception &e) {
    Fail(ErrorCode::kFormat, name + ": malformed manifest: " + e.what());
  }
  return ckpt;
}

}  // namespace svsd
