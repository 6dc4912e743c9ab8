#include "ecmirror/model_io.hpp"

#include <fstream>
#include <sstream>

#include "ecmirror/errors.hpp"

namespace ecmirror {

using nlohmann::json;

namespace {

json tree_to_json(const RegressionTree& tree) {
  json nodes = json::array();
  for (const auto& n : tree.nodes) {
    if (n.is_leaf()) {
      nodes.push_back({{"leaf", n.weight}});
    } else {
      nodes.push_back({{"feature", n.feature}, {"threshold", n.threshold},
                       {"left", n.left}, {"right", n.right}});
    }
  }
  return nodes;
}

RegressionTree tree_from_json(const json& nodes) {
  RegressionTree tree;
  for (const auto& n : nodes) {
    TreeNode node;
    if (n.contains("leaf")) {
      node.weight = n.at("leaf").get<double>();
    } else {
      node.feature = n.at("feature").get<int>();
      node.threshold = n.at("threshold").get<double>();
      node.left = n.at("left").get<int>();
      node.right = n.at("right").get<int>();
    }
    tree.nodes.push_back(node);
  }
  const auto size = static_cast<int>(tree.nodes.size());
  if (size == 0) throw FormatError("model: empty tree");
  for (const auto& n : tree.nodes) {
    if (n.is_leaf()) continue;
    if (n.feature >= static_cast<int>(kFeatureCount) || n.left <= 0 || n.right <= 0 ||
        n.left >= size || n.right >= size) {
      throw FormatError("model: corrupt tree node");
    }
  }
  return tree;
}

std::vector<double> flat(const Eigen::MatrixXd& m) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) out.push_back(m(r, c));
  }
  return out;
}

}  // namespace

json model_to_json(const EnsembleModel& model) {
  const auto& hp = model.gbt.hyperparams;
  json gbt = {
      {"learning_rate", hp.learning_rate},
      {"n_estimators", hp.n_estimators},
      {"max_depth", hp.max_depth},
      {"gamma", hp.gamma},
      {"lambda", hp.lambda},
      {"min_child_weight", hp.min_child_weight},
      {"base_score", model.gbt.base_score},
      {"trees", json::array()},
  };
  for (const auto& t : model.gbt.trees) gbt["trees"].push_back(tree_to_json(t));

  const auto& mlp = model.mlp;
  return {
      {"format", kModelFormat},
      {"version", kModelFormatVersion},
      {"scaler", {{"mean", model.scaler.mean}, {"scale", model.scaler.scale}}},
      {"gbt", gbt},
      {"mlp",
       {{"activation", std::string(to_string(mlp.activation))},
        {"alpha", mlp.alpha},
        {"inputs", mlp.inputs()},
        {"hidden", mlp.hidden()},
        {"w1", flat(mlp.w1)},
        {"b1", std::vector<double>(mlp.b1.data(), mlp.b1.data() + mlp.b1.size())},
        {"w2", std::vector<double>(mlp.w2.data(), mlp.w2.data() + mlp.w2.size())},
        {"b2", mlp.b2}}},
      {"meta",
       {{"coef", model.meta.coef}, {"intercept", model.meta.intercept}, {"alpha", model.meta.alpha}}},
  };
}

EnsembleModel model_from_json(const json& doc) {
  try {
    if (doc.at("format").get<std::string>() != kModelFormat) {
      throw FormatError("model: unexpected format tag");
    }
    if (doc.at("version").get<int>() != kModelFormatVersion) {
      throw FormatError("model: unsupported format version");
    }
    EnsembleModel model;
    model.scaler.mean = doc.at("scaler").at("mean").get<Features>();
    model.scaler.scale = doc.at("scaler").at("scale").get<Features>();

    const json& g = doc.at("gbt");
    auto& hp = model.gbt.hyperparams;
    hp.learning_rate = g.at("learning_rate").get<double>();
    hp.n_estimators = g.at("n_estimators").get<int>();
    hp.max_depth = g.at("max_depth").get<int>();
    hp.gamma = g.at("gamma").get<double>();
    hp.lambda = g.at("lambda").get<double>();
    hp.min_child_weight = g.at("min_child_weight").get<double>();
    model.gbt.base_score = g.at("base_score").get<double>();
    hp.base_score = model.gbt.base_score;
    for (const auto& t : g.at("trees")) model.gbt.trees.push_back(tree_from_json(t));

    const json& m = doc.at("mlp");
    auto& mlp = model.mlp;
    mlp.activation = activation_from_string(m.at("activation").get<std::string>());
    mlp.alpha = m.at("alpha").get<double>();
    const int inputs = m.at("inputs").get<int>();
    const int hidden = m.at("hidden").get<int>();
    if (inputs != static_cast<int>(kFeatureCount) || hidden <= 0) {
      throw FormatError("model: unsupported MLP shape");
    }
    const auto w1 = m.at("w1").get<std::vector<double>>();
    const auto b1 = m.at("b1").get<std::vector<double>>();
    const auto w2 = m.at("w2").get<std::vector<double>>();
    if (w1.size() != static_cast<std::size_t>(inputs * hidden) ||
        b1.size() != static_cast<std::size_t>(hidden) ||
        w2.size() != static_cast<std::size_t>(hidden)) {
      throw FormatError("model: MLP array sizes do not match shape");
    }
    mlp.w1.resize(hidden, inputs);
    for (int r = 0; r < hidden; ++r) {
      for (int c = 0; c < inputs; ++c) mlp.w1(r, c) = w1[static_cast<std::size_t>(r * inputs + c)];
    }
    mlp.b1 = Eigen::Map<const Eigen::VectorXd>(b1.data(), hidden);
    mlp.w2 = Eigen::Map<const Eigen::VectorXd>(w2.data(), hidden);
    mlp.b2 = m.at("b2").get<double>();

    const json& meta = doc.at("meta");
    model.meta.coef = meta.at("coef").get<std::vector<double>>();
    model.meta.intercept = meta.at("intercept").get<double>();
    model.meta.alpha = meta.at("alpha").get<double>();
    if (model.meta.coef.size() != 2) throw FormatError("model: meta-model needs 2 coefficients");
    return model;
  } catch (const json::exception& e) {
    throw FormatError(std::string("model: ") + e.what());
  } catch (const DomainError& e) {
    throw FormatError(std::string("model: ") + e.what());
  }
}

std::string serialize_model(const EnsembleModel& model) { return model_to_json(model).dump(); }

EnsembleModel deserialize_model(const std::string& text) {
  json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded()) throw FormatError("model: not valid JSON");
  return model_from_json(doc);
}

void save_model(const EnsembleModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write model file " + path.string());
  out << model_to_json(model).dump(1) << '\n';
  if (!out) throw FormatError("failed writing model file " + path.string());
}

EnsembleModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open model file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize_model(buf.str());
}

}  // namespace ecmirror
