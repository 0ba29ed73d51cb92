#include "affect/heads.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "affect/errors.hpp"
#include "affect/ingest.hpp"
#include "affect/random.hpp"

namespace affect {
namespace {

using Json = nlohmann::ordered_json;

DenseLayer make_layer(Rng& rng, std::size_t in, std::size_t out) {
  DenseLayer layer;
  layer.weight.resize(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in));
  const double limit = 1.0 / std::sqrt(static_cast<double>(in));
  // Row-major draw order, independent of Eigen storage order.
  for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
    for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = rng.uniform(-limit, limit);
  layer.bias = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(out));
  return layer;
}

Eigen::MatrixXd affine(const Eigen::MatrixXd& x, const DenseLayer& layer) {
  Eigen::MatrixXd z = x * layer.weight.transpose();
  z.rowwise() += layer.bias.transpose();
  return z;
}

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& z) {
  Eigen::MatrixXd p(z.rows(), z.cols());
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const double top = z.row(r).maxCoeff();
    double sum = 0.0;
    for (Eigen::Index c = 0; c < z.cols(); ++c) sum += (p(r, c) = std::exp(z(r, c) - top));
    p.row(r) /= sum;
  }
  return p;
}

Eigen::MatrixXd sigmoid(const Eigen::MatrixXd& z) {
  return z.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

void add_blocks(std::vector<ParameterBlock>& out, std::optional<DenseLayer>& layer, const char* name) {
  if (!layer) return;
  out.push_back({std::string(name) + ".weight", {layer->weight.data(), static_cast<std::size_t>(layer->weight.size())}});
  out.push_back({std::string(name) + ".bias", {layer->bias.data(), static_cast<std::size_t>(layer->bias.size())}});
}

void accumulate_layer(DenseLayer& grad, const Eigen::MatrixXd& out_grad, const Eigen::MatrixXd& layer_input) {
  grad.weight = out_grad.transpose() * layer_input;
  grad.bias = out_grad.colwise().sum().transpose();
}

Json layer_to_json(const DenseLayer& layer) {
  Json j;
  j["rows"] = layer.weight.rows();
  j["cols"] = layer.weight.cols();
  std::vector<double> w;
  w.reserve(static_cast<std::size_t>(layer.weight.size()));
  for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
    for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) w.push_back(layer.weight(r, c));
  j["weight"] = w;
  j["bias"] = std::vector<double>(layer.bias.data(), layer.bias.data() + layer.bias.size());
  return j;
}

DenseLayer layer_from_json(const Json& j, const std::string& name, std::size_t rows, std::size_t cols) {
  DenseLayer layer;
  if (j.at("rows").get<std::size_t>() != rows || j.at("cols").get<std::size_t>() != cols)
    throw ShapeError("checkpoint layer " + name + " has shape inconsistent with its architecture");
  const auto w = j.at("weight").get<std::vector<double>>();
  const auto b = j.at("bias").get<std::vector<double>>();
  if (w.size() != rows * cols || b.size() != rows)
    throw ShapeError("checkpoint layer " + name + " has the wrong number of values");
  layer.weight.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c)
      layer.weight(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = w[r * cols + c];
  layer.bias = Eigen::Map<const Eigen::VectorXd>(b.data(), static_cast<Eigen::Index>(b.size()));
  return layer;
}

}  // namespace

HeadArchitecture HeadArchitecture::for_task(Task task, FeatureKind kind, std::size_t embedding_dim,
                                            std::optional<std::size_t> hidden_units) {
  HeadArchitecture arch;
  arch.feature_kind = kind;
  arch.input_dim = affect::input_dim(kind, embedding_dim);
  arch.hidden_units = hidden_units;
  arch.expression = task == Task::Expression || task == Task::MultiTask;
  arch.valence_arousal = task == Task::ValenceArousal || task == Task::MultiTask;
  arch.action_units = task == Task::ActionUnits || task == Task::MultiTask;
  return arch;
}

bool HeadArchitecture::has_group(Task task) const {
  switch (task) {
    case Task::Expression: return expression;
    case Task::ValenceArousal: return valence_arousal;
    case Task::ActionUnits: return action_units;
    case Task::MultiTask: return expression && valence_arousal && action_units;
  }
  return false;
}

void HeadArchitecture::validate() const {
  if (input_dim == 0) throw ConfigError("head architecture: input_dim must be positive");
  if (hidden_units && *hidden_units == 0)
    throw ConfigError("head architecture: hidden_units must be positive when present");
  if (!expression && !valence_arousal && !action_units)
    throw ConfigError("head architecture: at least one output group is required");
}

std::vector<ParameterBlock> HeadModel::blocks() {
  std::vector<ParameterBlock> out;
  add_blocks(out, hidden, "hidden");
  add_blocks(out, expression, "expression");
  add_blocks(out, valence_arousal, "valence_arousal");
  add_blocks(out, action_units, "action_units");
  return out;
}

std::vector<ConstParameterBlock> HeadModel::blocks() const {
  std::vector<ConstParameterBlock> out;
  for (auto& b : const_cast<HeadModel*>(this)->blocks()) out.push_back({b.name, b.values});
  return out;
}

HeadModel HeadModel::zeros_like() const {
  HeadModel z = *this;
  for (auto& b : z.blocks()) std::fill(b.values.begin(), b.values.end(), 0.0);
  return z;
}

bool HeadModel::all_finite() const {
  auto finite = [](const std::optional<DenseLayer>& l) {
    return !l || (l->weight.allFinite() && l->bias.allFinite());
  };
  return finite(hidden) && finite(expression) && finite(valence_arousal) && finite(action_units);
}

HeadModel init_head(const HeadArchitecture& arch, std::uint64_t seed) {
  arch.validate();
  HeadModel model;
  model.arch = arch;
  model.seed = seed;
  Rng rng(seed);
  std::size_t width = arch.input_dim;
  if (arch.hidden_units) {
    model.hidden = make_layer(rng, arch.input_dim, *arch.hidden_units);
    width = *arch.hidden_units;
  }
  if (arch.expression) model.expression = make_layer(rng, width, kNumExpressions);
  if (arch.valence_arousal) model.valence_arousal = make_layer(rng, width, 2);
  if (arch.action_units) model.action_units = make_layer(rng, width, kNumActionUnits);
  return model;
}

BatchForward forward_batch(const HeadModel& model, const Eigen::MatrixXd& inputs) {
  if (static_cast<std::size_t>(inputs.cols()) != model.arch.input_dim)
    throw ShapeError("input width " + std::to_string(inputs.cols()) + " != model input_dim " +
                     std::to_string(model.arch.input_dim));
  BatchForward f;
  const Eigen::MatrixXd* top = &inputs;
  if (model.hidden) {
    f.hidden_pre = affine(inputs, *model.hidden);
    f.hidden = f.hidden_pre.cwiseMax(0.0);
    top = &f.hidden;
  }
  if (model.expression) {
    f.expr_logits = affine(*top, *model.expression);
    f.expr_probs = softmax_rows(f.expr_logits);
  }
  if (model.valence_arousal) {
    f.va_pre = affine(*top, *model.valence_arousal);
    f.va = f.va_pre.array().tanh().matrix();
  }
  if (model.action_units) {
    f.au_logits = affine(*top, *model.action_units);
    f.au_probs = sigmoid(f.au_logits);
  }
  return f;
}

namespace {

TaskPrediction row_prediction(const HeadModel& model, const BatchForward& f, Eigen::Index r) {
  TaskPrediction p;
  if (model.expression) {
    std::array<double, kNumExpressions> probs{};
    for (std::size_t c = 0; c < kNumExpressions; ++c) probs[c] = f.expr_probs(r, static_cast<Eigen::Index>(c));
    p.expr_probs = probs;
  }
  if (model.valence_arousal) p.va = ValenceArousal{f.va(r, 0), f.va(r, 1)};
  if (model.action_units) {
    std::array<double, kNumActionUnits> probs{};
    for (std::size_t c = 0; c < kNumActionUnits; ++c) probs[c] = f.au_probs(r, static_cast<Eigen::Index>(c));
    p.au_probs = probs;
  }
  return p;
}

}  // namespace

TaskPrediction forward(const HeadModel& model, std::span<const double> features) {
  if (features.size() != model.arch.input_dim)
    throw ShapeError("feature length " + std::to_string(features.size()) + " != model input_dim " +
                     std::to_string(model.arch.input_dim));
  const Eigen::MatrixXd x =
      Eigen::Map<const Eigen::RowVectorXd>(features.data(), static_cast<Eigen::Index>(features.size()));
  return row_prediction(model, forward_batch(model, x), 0);
}

HeadModel backward(const HeadModel& model, const Eigen::MatrixXd& inputs, const BatchForward& fwd,
                   const OutputGradients& grads) {
  HeadModel g = model.zeros_like();
  const Eigen::MatrixXd& top = model.hidden ? fwd.hidden : inputs;
  Eigen::MatrixXd d_top;
  auto group = [&](const std::optional<DenseLayer>& layer, std::optional<DenseLayer>& grad,
                   const Eigen::MatrixXd& out_grad) {
    if (!layer || out_grad.size() == 0) return;
    accumulate_layer(*grad, out_grad, top);
    if (model.hidden) {
      if (d_top.size() == 0) d_top = out_grad * layer->weight;
      else d_top += out_grad * layer->weight;
    }
  };
  group(model.expression, g.expression, grads.expr_logits);
  group(model.valence_arousal, g.valence_arousal, grads.va_pre);
  group(model.action_units, g.action_units, grads.au_logits);

  if (model.hidden && d_top.size() != 0) {
    const Eigen::MatrixXd d_pre =
        d_top.cwiseProduct(fwd.hidden_pre.unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; }));
    accumulate_layer(*g.hidden, d_pre, inputs);
  }
  return g;
}

void check_compatible(const HeadModel& model, std::size_t embedding_dim) {
  const auto need = input_dim(model.arch.feature_kind, embedding_dim);
  if (need != model.arch.input_dim)
    throw ShapeError("checkpoint expects input_dim " + std::to_string(model.arch.input_dim) + " (" +
                     std::string(feature_kind_name(model.arch.feature_kind)) + "), dataset with D=" +
                     std::to_string(embedding_dim) + " gives " + std::to_string(need));
}

std::vector<std::optional<TaskPrediction>> predict_track(const HeadModel& model, const VideoTrack& track,
                                                         FeatureKind kind) {
  std::vector<std::optional<TaskPrediction>> out(track.frames.size());
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < track.frames.size(); ++i)
    if (track.frames[i].features.detected) rows.push_back(i);
  if (rows.empty()) return out;

  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(model.arch.input_dim));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto input = effective_input(track.frames[rows[r]].features, kind);
    if (input.size() != model.arch.input_dim)
      throw ShapeError(track.video_id + " frame " + std::to_string(rows[r]) + ": feature length " +
                       std::to_string(input.size()) + " != model input_dim " +
                       std::to_string(model.arch.input_dim));
    for (std::size_t c = 0; c < input.size(); ++c)
      x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = input[c];
  }
  const auto f = forward_batch(model, x);
  for (std::size_t r = 0; r < rows.size(); ++r)
    out[rows[r]] = row_prediction(model, f, static_cast<Eigen::Index>(r));
  return out;
}

std::string checkpoint_to_json(const HeadModel& model) {
  Json j;
  j["format"] = "affect-head-checkpoint";
  j["version"] = 1;
  Json arch;
  arch["feature_kind"] = std::string(feature_kind_name(model.arch.feature_kind));
  arch["input_dim"] = model.arch.input_dim;
  arch["hidden_units"] = model.arch.hidden_units ? Json(*model.arch.hidden_units) : Json(nullptr);
  Json groups = Json::array();
  if (model.arch.expression) groups.push_back("expression");
  if (model.arch.valence_arousal) groups.push_back("valence_arousal");
  if (model.arch.action_units) groups.push_back("action_units");
  arch["groups"] = groups;
  j["architecture"] = arch;
  j["seed"] = model.seed;
  Json layers = Json::object();
  if (model.hidden) layers["hidden"] = layer_to_json(*model.hidden);
  if (model.expression) layers["expression"] = layer_to_json(*model.expression);
  if (model.valence_arousal) layers["valence_arousal"] = layer_to_json(*model.valence_arousal);
  if (model.action_units) layers["action_units"] = layer_to_json(*model.action_units);
  j["layers"] = layers;
  return j.dump(1) + "\n";
}

HeadModel checkpoint_from_json(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw Error(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  try {
    if (j.at("format") != "affect-head-checkpoint") throw Error("not an affect head checkpoint");
    if (j.at("version") != 1) throw Error("unsupported checkpoint version");
    const auto& a = j.at("architecture");
    HeadArchitecture arch;
    const auto kind = parse_feature_kind(a.at("feature_kind").get<std::string>());
    if (!kind) throw Error("checkpoint has an unknown feature_kind");
    arch.feature_kind = *kind;
    arch.input_dim = a.at("input_dim").get<std::size_t>();
    if (!a.at("hidden_units").is_null()) arch.hidden_units = a.at("hidden_units").get<std::size_t>();
    for (const auto& g : a.at("groups")) {
      if (g == "expression") arch.expression = true;
      else if (g == "valence_arousal") arch.valence_arousal = true;
      else if (g == "action_units") arch.action_units = true;
      else throw Error("checkpoint has an unknown output group");
    }
    arch.validate();

    HeadModel model;
    model.arch = arch;
    model.seed = j.at("seed").get<std::uint64_t>();
    const auto& layers = j.at("layers");
    std::size_t width = arch.input_dim;
    if (arch.hidden_units) {
      model.hidden = layer_from_json(layers.at("hidden"), "hidden", *arch.hidden_units, arch.input_dim);
      width = *arch.hidden_units;
    }
    if (arch.expression)
      model.expression = layer_from_json(layers.at("expression"), "expression", kNumExpressions, width);
    if (arch.valence_arousal)
      model.valence_arousal = layer_from_json(layers.at("valence_arousal"), "valence_arousal", 2, width);
    if (arch.action_units)
      model.action_units = layer_from_json(layers.at("action_units"), "action_units", kNumActionUnits, width);
    return model;
  } catch (const Json::exception& e) {
    throw Error(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const HeadModel& model) {
  write_text_file(path, checkpoint_to_json(model));
}

HeadModel load_checkpoint(const std::filesystem::path& path) {
  return checkpoint_from_json(read_text_file(path));
}

}  // namespace affect
