#include "cftle/types.hpp"

#include <algorithm>
#include <sstream>

namespace cftle {

namespace {
std::string describeFailure(Vec2 where, double when, const std::string &what) {
  std::ostringstream os;
  os.precision(17);
  os << what << " at position (" << where.x << ", " << where.y << "), t = " << when;
  return os.str();
}
}  // namespace

IntegrationError::IntegrationError(Vec2 where, double when, const std::string &what)
    : NumericalError(describeFailure(where, when, what)), position(where), time(when) {}

void DomainBox::validate() const {
  if (!(std::isfinite(x_min) && std::isfinite(x_max) && std::isfinite(y_min) &&
        std::isfinite(y_max)))
    throw ConfigError("domain box bounds must be finite");
  if (!(x_min < x_max) || !(y_min < y_max))
    throw ConfigError("domain box requires x_min < x_max and y_min < y_max");
}

Vec2 DomainBox::clamp(Vec2 p) const {
  return {std::clamp(p.x, x_min, x_max), std::clamp(p.y, y_min, y_max)};
}

void GridSpec::validate() const {
  domain.validate();
  if (nx < 3 || ny < 3) throw ConfigError("grid needs at least 3 nodes per axis");
  if (!(dx() > 0.0) || !(dy() > 0.0)) throw ConfigError("degenerate grid spacing");
}

std::size_t ScalarField::validCount() const {
  return static_cast<std::size_t>(std::count_if(valid.begin(), valid.end(), [](auto v) { return v != 0; }));
}

}  // namespace cftle
