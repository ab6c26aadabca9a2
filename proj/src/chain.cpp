#include "spinqfi/chain.hpp"

#include <cmath>

namespace spinqfi {

void ChainSpec::validate() const {
  if (sites < 1) throw std::invalid_argument("chain needs at least one site");
  if (sites > kMaxSites)
    throw std::invalid_argument("chain length " + std::to_string(sites) +
                                " exceeds the supported maximum of " +
                                std::to_string(kMaxSites));
  if (!(coupling > 0.0) || !std::isfinite(coupling))
    throw std::invalid_argument("coupling J must be positive and finite");
  if (!std::isfinite(field)) throw std::invalid_argument("field h must be finite");
  if (boundary != Boundary::open)
    throw std::invalid_argument("only open boundaries are supported");
  require_site(source, sites, "source site");
}

int sites_for_dimension(Eigen::Index dimension) {
  if (dimension < 2) throw std::invalid_argument("state dimension must be at least 2");
  int n = 0;
  while ((Eigen::Index{1} << n) < dimension) ++n;
  if ((Eigen::Index{1} << n) != dimension)
    throw std::invalid_argument("state dimension is not a power of two");
  if (n > kMaxSites) throw std::invalid_argument("state dimension too large");
  return n;
}

void require_site(int site, int sites, const char* what) {
  if (site < 1 || site > sites)
    throw std::out_of_range(std::string(what) + " " + std::to_string(site) +
                            " outside 1.." + std::to_string(sites));
}

}  // namespace spinqfi
