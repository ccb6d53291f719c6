#include "parityspace/presets.hpp"

#include "parityspace/types.hpp"

namespace parityspace {

bool is_preset(const std::string& name) { return name == "eq80" || name == "eq81"; }

LtiSystem preset_system(const std::string& name) {
  if (name == "eq80") {
    Mat a(3, 3);
    a << 0.9, 0.0, 0.0,
        13.4679, 0.9, 0.0,
        0.0, 0.1813, 1.0;
    Mat b(3, 1);
    b << 0.2835, 0.0, 0.0;
    Mat c(1, 3);
    c << 0.0, 0.0, 1.0;
    Mat q(1, 1), r(1, 1);
    q << 0.01;
    r << 0.01;
    return make_system(a, b, b, c, q, r);
  }
  if (name == "eq81") {
    Mat one(1, 1), q(1, 1), r(1, 1);
    one << 1.0;
    q << 1.0;
    r << 0.1;
    return make_system(one, one, one, one, q, r);
  }
  throw ConfigError("unknown preset '" + name + "' (expected eq80 or eq81)");
}

}  // namespace parityspace
