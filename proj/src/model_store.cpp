#include "ruc/model_store.hpp"

#include <bit>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "text_util.hpp"

namespace ruc {

namespace {

constexpr int kFormatVersion = 1;
constexpr char kB64Alphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error("model: " + msg); }

std::string encode_doubles(const std::vector<double>& values) {
  std::vector<unsigned char> bytes;
  bytes.reserve(values.size() * 8);
  for (double v : values) {
    const std::uint64_t u = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<unsigned char>((u >> (8 * i)) & 0xff));
  }

  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 3 <= bytes.size(); i += 3) {
    const unsigned v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
    out += kB64Alphabet[(v >> 18) & 63];
    out += kB64Alphabet[(v >> 12) & 63];
    out += kB64Alphabet[(v >> 6) & 63];
    out += kB64Alphabet[v & 63];
  }
  const std::size_t rest = bytes.size() - i;
  if (rest == 1) {
    const unsigned v = bytes[i] << 16;
    out += kB64Alphabet[(v >> 18) & 63];
    out += kB64Alphabet[(v >> 12) & 63];
    out += "==";
  } else if (rest == 2) {
    const unsigned v = (bytes[i] << 16) | (bytes[i + 1] << 8);
    out += kB64Alphabet[(v >> 18) & 63];
    out += kB64Alphabet[(v >> 12) & 63];
    out += kB64Alphabet[(v >> 6) & 63];
    out += '=';
  }
  return out;
}

std::vector<double> decode_doubles(const std::string& text, std::size_t expected_count,
                                   const std::string& context) {
  static const auto value_of = [] {
    std::array<int, 256> table;
    table.fill(-1);
    for (int i = 0; i < 64; ++i) table[static_cast<unsigned char>(kB64Alphabet[i])] = i;
    return table;
  }();

  if (text.size() % 4 != 0) fail(context + ": base64 length not a multiple of 4");
  std::vector<unsigned char> bytes;
  bytes.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    int vals[4];
    int pad = 0;
    for (int k = 0; k < 4; ++k) {
      const char c = text[i + k];
      if (c == '=') {
        if (i + 4 != text.size() || k < 2) fail(context + ": malformed base64 padding");
        vals[k] = 0;
        ++pad;
      } else {
        vals[k] = value_of[static_cast<unsigned char>(c)];
        if (vals[k] < 0) fail(context + ": invalid base64 character");
        if (pad > 0) fail(context + ": malformed base64 padding");
      }
    }
    const unsigned v = (static_cast<unsigned>(vals[0]) << 18) |
                       (static_cast<unsigned>(vals[1]) << 12) |
                       (static_cast<unsigned>(vals[2]) << 6) | static_cast<unsigned>(vals[3]);
    bytes.push_back(static_cast<unsigned char>((v >> 16) & 0xff));
    if (pad < 2) bytes.push_back(static_cast<unsigned char>((v >> 8) & 0xff));
    if (pad < 1) bytes.push_back(static_cast<unsigned char>(v & 0xff));
  }

  if (bytes.size() != expected_count * 8)
    fail(context + ": weight payload length mismatch (got " + std::to_string(bytes.size()) +
         " bytes, expected " + std::to_string(expected_count * 8) + ")");

  std::vector<double> values(expected_count);
  for (std::size_t i = 0; i < expected_count; ++i) {
    std::uint64_t u = 0;
    for (int k = 0; k < 8; ++k) u |= static_cast<std::uint64_t>(bytes[i * 8 + static_cast<std::size_t>(k)]) << (8 * k);
    values[i] = std::bit_cast<double>(u);
  }
  return values;
}

}  // namespace

std::string save_model(const Network& net, const Standardizer& standardizer,
                       const ModelProvenance& provenance) {
  nlohmann::json j;
  j["format_version"] = kFormatVersion;
  j["hyperparams"] = {{"in2rec_layers", net.spec.in2rec_layers},
                      {"lstm_layers", net.spec.lstm_layers},
                      {"rec2out_layers", net.spec.rec2out_layers},
                      {"width", net.spec.width},
                      {"activation", to_string(net.spec.activation)}};
  j["classes"] = nlohmann::json::array();
  for (RoadUserClass c : kAllClasses) j["classes"].push_back(to_string(c));
  for (int f = 0; f < kFeatureCount; ++f) {
    j["standardizer"]["mean"].push_back(standardizer.mean[f]);
    j["standardizer"]["stddev"].push_back(standardizer.stddev[f]);
  }

  j["layers"] = nlohmann::json::array();
  for (const Layer& layer : net.layers) {
    if (const auto* d = std::get_if<DenseLayer>(&layer)) {
      j["layers"].push_back({{"kind", "dense"},
                             {"in", d->in},
                             {"out", d->out},
                             {"activation", d->softmax_output ? "softmax" : to_string(d->act)},
                             {"w", encode_doubles(d->w)},
                             {"b", encode_doubles(d->b)}});
    } else {
      const auto& m = std::get<LstmLayer>(layer);
      j["layers"].push_back({{"kind", "lstm"},
                             {"in", m.in},
                             {"width", m.width},
                             {"wx", encode_doubles(m.wx)},
                             {"wh", encode_doubles(m.wh)},
                             {"b", encode_doubles(m.b)}});
    }
  }

  j["provenance"] = {{"network_seed", provenance.network_seed},
                     {"shuffle_seed", provenance.shuffle_seed},
                     {"split_seed", provenance.split_seed},
                     {"dataset_variant", provenance.dataset_variant},
                     {"history_digest", provenance.history_digest}};
  return j.dump(1) + "\n";
}

void save_model_file(const Network& net, const Standardizer& standardizer,
                     const ModelProvenance& provenance, const std::filesystem::path& path) {
  detail::write_file(path, save_model(net, standardizer, provenance));
}

LoadedModel load_model(const std::string& artifact) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(artifact);
  } catch (const nlohmann::json::exception& e) {
    fail(std::string("invalid JSON: ") + e.what());
  }

  if (!j.contains("format_version") || !j["format_version"].is_number_integer())
    fail("missing format_version");
  const int version = j["format_version"].get<int>();
  if (version != kFormatVersion)
    fail("unsupported format_version " + std::to_string(version) + " (supported: " +
         std::to_string(kFormatVersion) + ")");

  if (!j.contains("standardizer")) fail("standardizer required");
  if (!j.contains("classes") || j["classes"].size() != kClassCount) fail("missing class list");
  for (int c = 0; c < kClassCount; ++c) {
    if (j["classes"].at(static_cast<std::size_t>(c)).get<std::string>() != to_string(kAllClasses[c]))
      fail("class order mismatch");
  }

  LoadedModel loaded;
  const auto& hp = j.at("hyperparams");
  loaded.net.spec.in2rec_layers = hp.at("in2rec_layers").get<int>();
  loaded.net.spec.lstm_layers = hp.at("lstm_layers").get<int>();
  loaded.net.spec.rec2out_layers = hp.at("rec2out_layers").get<int>();
  loaded.net.spec.width = hp.at("width").get<int>();
  const auto act = parse_activation(hp.at("activation").get<std::string>());
  if (!act) fail("unknown activation");
  loaded.net.spec.activation = *act;

  Network skeleton = make_network(loaded.net.spec);
  const auto& layers = j.at("layers");
  if (layers.size() != skeleton.layers.size())
    fail("layer count mismatch (got " + std::to_string(layers.size()) + ", expected " +
         std::to_string(skeleton.layers.size()) + ")");

  for (std::size_t l = 0; l < skeleton.layers.size(); ++l) {
    const auto& jl = layers.at(l);
    const std::string context = "layer " + std::to_string(l);
    if (auto* d = std::get_if<DenseLayer>(&skeleton.layers[l])) {
      if (jl.at("kind").get<std::string>() != "dense") fail(context + ": kind mismatch");
      if (jl.at("in").get<int>() != d->in || jl.at("out").get<int>() != d->out)
        fail(context + ": shape mismatch");
      d->w = decode_doubles(jl.at("w").get<std::string>(), d->w.size(), context);
      d->b = decode_doubles(jl.at("b").get<std::string>(), d->b.size(), context);
    } else {
      auto& m = std::get<LstmLayer>(skeleton.layers[l]);
      if (jl.at("kind").get<std::string>() != "lstm") fail(context + ": kind mismatch");
      if (jl.at("in").get<int>() != m.in || jl.at("width").get<int>() != m.width)
        fail(context + ": shape mismatch");
      m.wx = decode_doubles(jl.at("wx").get<std::string>(), m.wx.size(), context);
      m.wh = decode_doubles(jl.at("wh").get<std::string>(), m.wh.size(), context);
      m.b = decode_doubles(jl.at("b").get<std::string>(), m.b.size(), context);
    }
  }
  loaded.net.layers = std::move(skeleton.layers);

  const auto& st = j.at("standardizer");
  if (st.at("mean").size() != kFeatureCount || st.at("stddev").size() != kFeatureCount)
    fail("standardizer must carry 5 means and 5 stddevs");
  for (int f = 0; f < kFeatureCount; ++f) {
    loaded.standardizer.mean[f] = st.at("mean").at(static_cast<std::size_t>(f)).get<double>();
    loaded.standardizer.stddev[f] = st.at("stddev").at(static_cast<std::size_t>(f)).get<double>();
  }

  if (j.contains("provenance")) {
    const auto& p = j["provenance"];
    loaded.provenance.network_seed = p.value("network_seed", std::uint64_t{0});
    loaded.provenance.shuffle_seed = p.value("shuffle_seed", std::uint64_t{0});
    loaded.provenance.split_seed = p.value("split_seed", std::uint64_t{0});
    loaded.provenance.dataset_variant = p.value("dataset_variant", std::string{});
    loaded.provenance.history_digest = p.value("history_digest", std::string{});
  }
  return loaded;
}

LoadedModel load_model_file(const std::filesystem::path& path) {
  return load_model(detail::read_file(path));
}

}  // namespace ruc
