#include "mpath/model.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "mpath/error.hpp"
#include "mpath/text.hpp"

namespace mpath {

const char* to_string(ModelKind kind) noexcept {
  switch (kind) {
    case ModelKind::text: return "text";
    case ModelKind::metadata: return "metadata";
    case ModelKind::combined: return "combined";
  }
  return "?";
}

ModelKind model_kind_from_string(std::string_view s) {
  if (s == "text") return ModelKind::text;
  if (s == "metadata") return ModelKind::metadata;
  if (s == "combined") return ModelKind::combined;
  fail(ErrorKind::config, "unknown model kind '" + std::string(s) + "'");
}

void ModelConfig::validate() const {
  require(classes.size() >= 2, ErrorKind::config,
          "a classifier needs at least two classes");
  if (has_text()) {
    require(vocab_size >= 2, ErrorKind::config, "text path needs a vocabulary");
    require(seq_len >= 1, ErrorKind::config, "text path needs seq_len >= 1");
    require(embedding_dim >= 1 && gru_units >= 1, ErrorKind::config,
            "text path widths must be positive");
  }
  if (has_metadata()) {
    require(feature_dim() >= 1, ErrorKind::config,
            "metadata path needs at least one feature column");
    require(metadata_width >= 1, ErrorKind::config,
            "metadata feature width must be positive");
    for (auto w : dense_widths)
      require(w >= 1, ErrorKind::config, "dense widths must be positive");
  }
  if (kind == ModelKind::combined)
    require(gru_units == kFusionWidth && metadata_width == kFusionWidth,
            ErrorKind::contract,
            "fusion expects " + std::to_string(kFusionWidth) +
                "-wide features from both paths, got " +
                std::to_string(gru_units) + " and " +
                std::to_string(metadata_width));
}

nlohmann::json ModelConfig::to_json() const {
  nlohmann::json cols = nlohmann::json::array();
  for (const auto& c : schema)
    cols.push_back({{"name", c.name}, {"group", mpath::to_string(c.group)}});
  return {{"kind", mpath::to_string(kind)},
          {"classes", classes},
          {"vocab_size", vocab_size},
          {"seq_len", seq_len},
          {"embedding_dim", embedding_dim},
          {"gru_units", gru_units},
          {"recurrent_dropout", recurrent_dropout},
          {"schema", cols},
          {"dense_widths", dense_widths},
          {"metadata_width", metadata_width},
          {"seed", seed}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  try {
    c.kind = model_kind_from_string(j.at("kind").get<std::string>());
    c.classes = j.at("classes").get<std::vector<std::string>>();
    c.vocab_size = j.at("vocab_size").get<std::size_t>();
    c.seq_len = j.at("seq_len").get<std::size_t>();
    c.embedding_dim = j.at("embedding_dim").get<std::size_t>();
    c.gru_units = j.at("gru_units").get<std::size_t>();
    c.recurrent_dropout = j.at("recurrent_dropout").get<double>();
    for (const auto& col : j.at("schema"))
      c.schema.push_back({col.at("name").get<std::string>(),
                          feature_group_from_string(col.at("group").get<std::string>())});
    c.dense_widths = j.at("dense_widths").get<std::vector<std::size_t>>();
    c.metadata_width = j.at("metadata_width").get<std::size_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::format, std::string("model config: ") + e.what());
  }
  return c;
}

namespace {

template <typename T, typename U>
Tensor<T> convert(const Tensor<U>& src) {
  Tensor<T> out(src.shape());
  for (std::size_t i = 0; i < src.size(); ++i) out[i] = static_cast<T>(src[i]);
  return out;
}

}  // namespace

template <typename T>
Model<T>::Model(ModelConfig config, std::optional<Tensor<float>> embeddings)
    : config_(std::move(config)) {
  config_.validate();
  std::mt19937_64 rng(config_.seed);
  std::size_t head_in = 0;

  if (config_.has_text()) {
    Tensor<float> table = embeddings ? std::move(*embeddings)
                                     : random_embeddings(config_.vocab_size,
                                                         config_.embedding_dim,
                                                         config_.seed);
    require(table.shape() == Shape{config_.vocab_size, config_.embedding_dim},
            ErrorKind::dimension,
            "embedding table is " + shape_str(table.shape()) + ", expected [" +
                std::to_string(config_.vocab_size) + ", " +
                std::to_string(config_.embedding_dim) + "]");
    embedding_ = Embedding<T>(store_, "text.embedding", PathTag::text,
                              convert<T>(table));
    gru_ = Gru<T>(store_, "text.gru", PathTag::text, config_.embedding_dim,
                  config_.gru_units, config_.recurrent_dropout, rng);
    if (config_.attention())
      attention_ = Attention<T>(store_, "text.attention", PathTag::text,
                                config_.gru_units, rng);
    head_in += config_.gru_units;
  }

  if (config_.has_metadata()) {
    bn_ = BatchNorm<T>(store_, "metadata.bn", PathTag::metadata,
                       config_.feature_dim());
    std::size_t in = config_.feature_dim();
    std::size_t k = 1;
    for (auto w : config_.dense_widths) {
      dense_.emplace_back(store_, "metadata.dense" + std::to_string(k++),
                          PathTag::metadata, in, w, Activation::tanh, rng);
      in = w;
    }
    dense_.emplace_back(store_, "metadata.dense" + std::to_string(k),
                        PathTag::metadata, in, config_.metadata_width,
                        Activation::tanh, rng);
    head_in += config_.metadata_width;
  }

  head_ = Dense<T>(store_, "head", PathTag::head, head_in,
                   config_.classes.size(), Activation::softmax, rng);
}

template <typename T>
Variable<T> Model<T>::text_features(Tape<T>& tape, const Batch& batch,
                                    bool train, std::mt19937_64* rng) const {
  require(config_.has_text(), ErrorKind::contract, "model has no text path");
  require(batch.seq_len == config_.seq_len, ErrorKind::dimension,
          "batch seq_len " + std::to_string(batch.seq_len) + " != model seq_len " +
              std::to_string(config_.seq_len));
  const std::size_t b = batch.size, steps = batch.seq_len;
  std::vector<std::uint8_t> valid(batch.tokens.size());
  for (std::size_t i = 0; i < valid.size(); ++i)
    valid[i] = batch.tokens[i] != Vocabulary::kPad;

  auto x = embedding_.forward(tape, batch.tokens, b, steps);
  Variable<T> h0(Tensor<T>({b, config_.gru_units}));
  const bool attend = config_.attention();
  auto out = gru_.forward(tape, x, valid, h0, train, rng, attend);
  if (!attend) return out.last;
  // An all-padding row attends to its final (initial-state) position.
  for (std::size_t r = 0; r < b; ++r) {
    bool any = false;
    for (std::size_t t = 0; t < steps; ++t) any = any || valid[r * steps + t];
    if (!any) valid[r * steps + steps - 1] = 1;
  }
  return attention_.forward(tape, out.states, valid);
}

template <typename T>
Variable<T> Model<T>::metadata_features(Tape<T>& tape, const Batch& batch,
                                        bool train) const {
  require(config_.has_metadata(), ErrorKind::contract,
          "model has no metadata path");
  require(batch.feature_dim == config_.feature_dim(), ErrorKind::dimension,
          "batch has " + std::to_string(batch.feature_dim) +
              " features, model expects " +
              std::to_string(config_.feature_dim()));
  Tensor<T> x({batch.size, batch.feature_dim});
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<T>(batch.features[i]);
  auto h = bn_.forward(tape, Variable<T>(std::move(x)), train);
  for (const auto& layer : dense_) h = layer.forward(tape, h);
  return h;
}

template <typename T>
Variable<T> Model<T>::classify(Tape<T>& tape, const Variable<T>& text,
                               const Variable<T>& metadata) const {
  if (text && metadata) return head_.forward(tape, ops::concat_last(tape, text, metadata));
  require(static_cast<bool>(text) || static_cast<bool>(metadata),
          ErrorKind::contract, "classify needs at least one path");
  return head_.forward(tape, text ? text : metadata);
}

template <typename T>
Variable<T> Model<T>::forward(Tape<T>& tape, const Batch& batch, bool train,
                              std::mt19937_64* rng) const {
  Variable<T> text, meta;
  if (config_.has_text()) text = text_features(tape, batch, train, rng);
  if (config_.has_metadata()) meta = metadata_features(tape, batch, train);
  return classify(tape, text, meta);
}

template <typename T>
std::vector<double> Model<T>::predict(const Dataset& data,
                                      std::size_t batch_size) const {
  require(batch_size >= 1, ErrorKind::config, "batch size must be positive");
  const std::size_t c = config_.classes.size();
  std::vector<double> out;
  out.reserve(data.size() * c);
  std::vector<std::size_t> rows;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    rows.clear();
    for (std::size_t r = start; r < std::min(data.size(), start + batch_size); ++r)
      rows.push_back(r);
    Tape<T> tape(false);
    auto p = forward(tape, data.batch(rows), false, nullptr);
    for (auto v : p.value().values()) out.push_back(static_cast<double>(v));
  }
  return out;
}

template <typename T>
template <typename U>
void Model<T>::copy_path_from(const Model<U>& other, PathTag path) {
  for (auto& p : store_.all()) {
    if (p.path != path) continue;
    const auto* src = other.params().find(p.name);
    require(src != nullptr, ErrorKind::lookup,
            "source model has no parameter " + p.name);
    require(src->var.shape() == p.var.shape(), ErrorKind::dimension,
            "shape mismatch copying " + p.name);
    p.var.mutable_value() = convert<T>(src->var.value());
  }
}

template class Model<float>;
template class Model<double>;
template void Model<float>::copy_path_from(const Model<float>&, PathTag);
template void Model<double>::copy_path_from(const Model<double>&, PathTag);
template void Model<double>::copy_path_from(const Model<float>&, PathTag);
template void Model<float>::copy_path_from(const Model<double>&, PathTag);

namespace {

constexpr char kMagic[8] = {'M', 'P', 'A', 'T', 'H', 'C', 'K', 'P'};

void put_bytes(std::ostream& out, const void* p, std::size_t n) {
  out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

template <typename I>
void put_le(std::ostream& out, I v) {
  unsigned char buf[sizeof(I)];
  for (std::size_t i = 0; i < sizeof(I); ++i)
    buf[i] = static_cast<unsigned char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xFF);
  put_bytes(out, buf, sizeof(I));
}

template <typename I>
I get_le(std::istream& in) {
  unsigned char buf[sizeof(I)];
  in.read(reinterpret_cast<char*>(buf), sizeof(I));
  require(static_cast<bool>(in), ErrorKind::format, "truncated checkpoint");
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(I); ++i) v |= std::uint64_t(buf[i]) << (8 * i);
  return static_cast<I>(v);
}

std::string get_string(std::istream& in, std::size_t n) {
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  require(static_cast<bool>(in), ErrorKind::format, "truncated checkpoint");
  return s;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Model<float>& model,
                     const nlohmann::json& extra) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::io, "cannot write checkpoint " + path.string());
  const nlohmann::json header = {{"format_version", kCheckpointVersion},
                                 {"model", model.config().to_json()},
                                 {"extra", extra}};
  const std::string text = header.dump();
  put_bytes(out, kMagic, sizeof kMagic);
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint64_t>(out, text.size());
  put_bytes(out, text.data(), text.size());

  const auto& params = model.params().all();
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
    put_bytes(out, p.name.data(), p.name.size());
    put_le<std::uint8_t>(out, static_cast<std::uint8_t>(p.path));
    put_le<std::uint8_t>(out, p.trainable ? 1 : 0);
    put_le<std::uint8_t>(out, p.buffer ? 1 : 0);
    const auto& shape = p.var.shape();
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(shape.size()));
    for (auto d : shape) put_le<std::uint64_t>(out, d);
    for (float v : p.var.value().values()) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
  }
  if (!out) fail(ErrorKind::io, "failed writing checkpoint " + path.string());
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open checkpoint " + path.string());
  char magic[sizeof kMagic];
  in.read(magic, sizeof magic);
  require(in && std::memcmp(magic, kMagic, sizeof kMagic) == 0, ErrorKind::format,
          path.string() + " is not a checkpoint");
  const auto version = get_le<std::uint32_t>(in);
  require(version == kCheckpointVersion, ErrorKind::format,
          "unsupported checkpoint version " + std::to_string(version));
  const auto header_len = get_le<std::uint64_t>(in);
  require(header_len < (std::uint64_t(1) << 32), ErrorKind::format,
          "corrupt checkpoint header length");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(get_string(in, header_len));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::format, std::string("checkpoint header: ") + e.what());
  }

  Model<float> model(ModelConfig::from_json(header.at("model")));
  auto& params = model.params();
  const auto count = get_le<std::uint32_t>(in);
  require(count == params.all().size(), ErrorKind::format,
          "checkpoint holds " + std::to_string(count) + " tensors, model has " +
              std::to_string(params.all().size()));
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name = get_string(in, get_le<std::uint32_t>(in));
    auto* p = params.find(name);
    require(p != nullptr, ErrorKind::format, "unexpected checkpoint tensor " + name);
    const auto tag = get_le<std::uint8_t>(in);
    const bool trainable = get_le<std::uint8_t>(in) != 0;
    const bool buffer = get_le<std::uint8_t>(in) != 0;
    require(tag == static_cast<std::uint8_t>(p->path) && buffer == p->buffer,
            ErrorKind::format, "checkpoint tags disagree for " + name);
    const auto rank = get_le<std::uint32_t>(in);
    Shape shape(rank);
    for (auto& d : shape) d = get_le<std::uint64_t>(in);
    require(shape == p->var.shape(), ErrorKind::format,
            "checkpoint shape " + shape_str(shape) + " for " + name +
                ", model expects " + shape_str(p->var.shape()));
    auto& value = p->var.mutable_value();
    for (auto& v : value.values()) v = std::bit_cast<float>(get_le<std::uint32_t>(in));
    p->trainable = trainable;
    p->var.set_requires_grad(trainable);
  }
  return {std::move(model), header.value("extra", nlohmann::json::object())};
}

}  // namespace mpath
