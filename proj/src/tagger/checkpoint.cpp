#include "topoterm/tagger/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "topoterm/error.hpp"

namespace topoterm {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'T', 'T', 'C', 'K'};

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& in, const std::string& what) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw ParseError("checkpoint truncated in " + what);
  return v;
}

TrainResult history_from_json(const nlohmann::json& j) {
  TrainResult r;
  r.train_loss = j.at("train_loss").get<std::vector<double>>();
  r.val_loss = j.at("val_loss").get<std::vector<double>>();
  r.best_epoch = j.at("best_epoch").get<std::size_t>();
  r.epochs_run = j.at("epochs_run").get<std::size_t>();
  r.stopped_early = j.at("stopped_early").get<bool>();
  return r;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const TaggerModel& model,
                     const TrainResult* history, const TrainingConfig* training) {
  nlohmann::json header;
  header["config"] = to_json(model.config());
  header["seed"] = model.seed();
  header["normalizer"] = {{"offset", model.normalizer().offset}, {"scale", model.normalizer().scale}};
  header["history"] = history ? to_json(*history) : nlohmann::json(nullptr);
  header["training"] = training ? to_json(*training) : nlohmann::json(nullptr);
  auto manifest = nlohmann::json::array();
  for (const auto& p : model.params()) manifest.push_back({p.name, p.value.rows(), p.value.cols()});
  header["parameters"] = std::move(manifest);
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  out.write(kMagic, 4);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  std::vector<float> buf;
  for (const auto& p : model.params()) {
    buf.resize(static_cast<std::size_t>(p.value.size()));
    for (Eigen::Index i = 0; i < p.value.size(); ++i) buf[static_cast<std::size_t>(i)] = static_cast<float>(p.value.data()[i]);
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
  }
  if (!out) throw Error("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw ParseError(path.string() + " is not a tagger checkpoint");
  }
  const auto version = get<std::uint32_t>(in, "version");
  if (version != kCheckpointVersion) {
    throw ParseError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  }
  const auto len = get<std::uint64_t>(in, "header length");
  std::string text(len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(len))) throw ParseError("checkpoint truncated in header");

  Checkpoint ck;
  try {
    const auto header = nlohmann::json::parse(text);
    const ModelConfig cfg = model_config_from_json(header.at("config"));
    ck.model = build_model(cfg, header.at("seed").get<std::uint64_t>());
    ck.model.normalizer().offset = header.at("normalizer").at("offset").get<std::vector<double>>();
    ck.model.normalizer().scale = header.at("normalizer").at("scale").get<std::vector<double>>();
    if (!header.at("history").is_null()) ck.history = history_from_json(header.at("history"));
    if (!header.at("training").is_null()) ck.training = header.at("training");

    const auto& manifest = header.at("parameters");
    auto& ps = ck.model.params();
    if (manifest.size() != ps.size()) {
      throw ParseError(path.string() + ": parameter count " + std::to_string(manifest.size()) +
                       " does not match the model (" + std::to_string(ps.size()) + ")");
    }
    std::vector<float> buf;
    for (std::size_t i = 0; i < ps.size(); ++i) {
      auto& p = ps[i];
      const auto name = manifest[i].at(0).get<std::string>();
      const auto rows = manifest[i].at(1).get<Eigen::Index>();
      const auto cols = manifest[i].at(2).get<Eigen::Index>();
      if (name != p.name || rows != p.value.rows() || cols != p.value.cols()) {
        throw ParseError(path.string() + ": parameter '" + name + "' does not match model layout");
      }
      buf.resize(static_cast<std::size_t>(rows * cols));
      if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)))) {
        throw ParseError("checkpoint truncated in parameter '" + name + "'");
      }
      for (std::size_t k = 0; k < buf.size(); ++k) p.value.data()[k] = static_cast<double>(buf[k]);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": bad checkpoint header: " + e.what());
  }
  return ck;
}

}  // namespace topoterm
