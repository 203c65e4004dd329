#ifndef MLELAB_MODEL_IO_HPP
#define MLELAB_MODEL_IO_HPP

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "mlelab/errors.hpp"
#include "mlelab/linear_model.hpp"

namespace mlelab {

/// Versioned text model file:
///   mlelab-model v1 <kind>
///   d <feature count>
///   theta <d values>            (point-estimate kinds)
/// or, for znbp,
///   alpha <tail>
///   row <7 values> x 6          (6 x (d+1) link-layer weights)
/// Values are written with 17 significant digits so doubles round-trip to
/// the last stored digit.
struct ModelFile {
  std::string kind;  // ls | tmo-mae | ... | poisson-mle | pareto-mle | mom | znbp
  std::size_t d = 0;
  std::variant<ParamVector, LinkLayer> params;

  bool is_znbp() const { return kind == "znbp"; }
  const ParamVector& theta() const { return std::get<ParamVector>(params); }
  const LinkLayer& layer() const { return std::get<LinkLayer>(params); }
};

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

inline void save_model(const ModelFile& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write '" + path + "'");
  out << "mlelab-model v1 " << model.kind << "\n";
  out << "d " << model.d << "\n";
  if (model.is_znbp()) {
    const LinkLayer& layer = model.layer();
    out << "alpha " << detail::format_double(layer.pareto_tail) << "\n";
    for (std::size_t r = 0; r < 6; ++r) {
      out << "row";
      for (std::size_t c = 0; c < layer.weights.cols(); ++c)
        out << " " << detail::format_double(layer.weights(r, c));
      out << "\n";
    }
  } else {
    out << "theta";
    for (double v : model.theta()) out << " " << detail::format_double(v);
    out << "\n";
  }
  if (!out) throw ParseError("write failed for '" + path + "'");
}

inline ModelFile load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  std::string magic, version;
  ModelFile model;
  if (!(in >> magic >> version >> model.kind) || magic != "mlelab-model" || version != "v1")
    throw ParseError("'" + path + "' is not a v1 model file");
  std::string key;
  if (!(in >> key >> model.d) || key != "d")
    throw ParseError("model file missing dimension line");

  if (model.kind == "znbp") {
    double alpha = 0.0;
    if (!(in >> key >> alpha) || key != "alpha")
      throw ParseError("znbp model missing alpha line");
    Matrix w(6, model.d + 1);
    for (std::size_t r = 0; r < 6; ++r) {
      if (!(in >> key) || key != "row") throw ParseError("znbp model missing weight row");
      for (std::size_t c = 0; c <= model.d; ++c) {
        if (!(in >> w(r, c))) throw ParseError("znbp model truncated weight row");
      }
    }
    model.params = LinkLayer(std::move(w), alpha);
  } else {
    if (!(in >> key) || key != "theta") throw ParseError("model file missing theta line");
    ParamVector theta(model.d);
    for (std::size_t j = 0; j < model.d; ++j)
      if (!(in >> theta[j])) throw ParseError("model file truncated theta line");
    model.params = std::move(theta);
  }
  return model;
}

}  // namespace mlelab

#endif  // MLELAB_MODEL_IO_HPP
