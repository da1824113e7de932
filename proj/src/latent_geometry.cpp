#include "latentforge/latent_geometry.hpp"

#include <cmath>
#include <string>

#include "latentforge/errors.hpp"
#include "latentforge/vecmath.hpp"

namespace latentforge {

namespace {

void require_same_dim(std::size_t a, std::size_t b, const char* what) {
  if (a != b)
    throw DimensionError(std::string(what) + ": latent dim " + std::to_string(a) +
                         " != boundary dim " + std::to_string(b));
}

}  // namespace

LatentVector::LatentVector(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) throw InputError("latent vector must have dimension >= 1");
  if (!vecmath::all_finite(values_)) throw InputError("latent vector has non-finite entries");
}

AttributeBoundary::AttributeBoundary(std::string attribute, std::vector<double> normal, double bias,
                                     BoundaryMeta meta)
    : attribute_(std::move(attribute)), normal_(std::move(normal)), bias_(bias), meta_(meta) {
  if (normal_.empty()) throw InputError("boundary '" + attribute_ + "' has an empty normal");
  if (!vecmath::all_finite(normal_) || !std::isfinite(bias_))
    throw InputError("boundary '" + attribute_ + "' has non-finite parameters");
  const double n = vecmath::norm(normal_);
  if (n == 0.0) throw InvariantError("boundary '" + attribute_ + "' has a zero normal");
  for (double& v : normal_) v /= n;
  validate_meta();
}

AttributeBoundary AttributeBoundary::verbatim(std::string attribute, std::vector<double> normal,
                                              double bias, BoundaryMeta meta) {
  AttributeBoundary b;
  b.attribute_ = std::move(attribute);
  b.normal_ = std::move(normal);
  b.bias_ = bias;
  b.meta_ = meta;
  if (b.normal_.empty()) throw InputError("boundary '" + b.attribute_ + "' has an empty normal");
  if (!vecmath::all_finite(b.normal_) || !std::isfinite(b.bias_))
    throw InputError("boundary '" + b.attribute_ + "' has non-finite parameters");
  b.validate_meta();
  return b;
}

void AttributeBoundary::validate_meta() const {
  if (!(meta_.validation_accuracy >= 0.0 && meta_.validation_accuracy <= 1.0))
    throw InvariantError("boundary '" + attribute_ + "': validation_accuracy outside [0,1]");
  if (!(meta_.average_distance >= 0.0))
    throw InvariantError("boundary '" + attribute_ + "': average_distance < 0");
}

nlohmann::json AttributeBoundary::to_json() const {
  return {{"attribute", attribute_},
          {"normal", normal_},
          {"bias", bias_},
          {"n_train", meta_.n_train},
          {"validation_accuracy", meta_.validation_accuracy},
          {"average_distance", meta_.average_distance}};
}

AttributeBoundary AttributeBoundary::from_json(const nlohmann::json& doc) {
  try {
    BoundaryMeta meta;
    meta.n_train = doc.at("n_train").get<std::size_t>();
    meta.validation_accuracy = doc.at("validation_accuracy").get<double>();
    meta.average_distance = doc.at("average_distance").get<double>();
    return verbatim(doc.at("attribute").get<std::string>(),
                    doc.at("normal").get<std::vector<double>>(), doc.at("bias").get<double>(), meta);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("boundary document: ") + e.what());
  }
}

LatentVector transform(const LatentVector& w, const AttributeBoundary& b, double alpha) {
  require_same_dim(w.dim(), b.dim(), "transform");
  if (!std::isfinite(alpha)) throw InputError("transform: alpha must be finite");
  std::vector<double> out(w.values().begin(), w.values().end());
  vecmath::axpy(alpha, b.normal(), out);
  return LatentVector(std::move(out));
}

LatentVector neutralize(const LatentVector& w, const AttributeBoundary& b) {
  require_same_dim(w.dim(), b.dim(), "neutralize");
  const double n = vecmath::norm(b.normal());
  if (std::abs(n - 1.0) > kUnitNormTolerance)
    throw InvariantError("neutralize: boundary '" + b.attribute() + "' normal has norm " +
                         std::to_string(n));
  std::vector<double> out(w.values().begin(), w.values().end());
  vecmath::axpy(-vecmath::dot(w.values(), b.normal()), b.normal(), out);
  return LatentVector(std::move(out));
}

double signed_distance(const LatentVector& w, const AttributeBoundary& b) {
  require_same_dim(w.dim(), b.dim(), "signed_distance");
  return vecmath::dot(w.values(), b.normal()) + b.bias();
}

LatentVector compose_edits(const LatentVector& w, std::span<const EditStep> steps) {
  LatentVector current = w;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const EditStep& step = steps[i];
    try {
      current = step.is_neutralize() ? neutralize(current, step.boundary.get())
                                     : transform(current, step.boundary.get(), *step.alpha);
    } catch (const Error& e) {
      rethrow_with_context(e, "edit step " + std::to_string(i));
    }
  }
  return current;
}

}  // namespace latentforge
