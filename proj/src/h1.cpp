#include "radtomo/h1.hpp"

#include <stdexcept>
#include <vector>

namespace radtomo {

H1Metric::H1Metric(const SpatialGrid& grid) {
  const Index m = grid.num_cells();
  std::vector<Eigen::Triplet<Scalar>> entries;
  entries.reserve(static_cast<size_t>(5 * m));
  const Scalar area = grid.cell_area();
  for (Index c = 0; c < m; ++c) entries.emplace_back(c, c, area);
  // Difference quotient across each interior face contributes
  // area * ((u_nb - u_c)/h)^2 = (u_nb - u_c)^2 to the squared seminorm.
  for (Index c = 0; c < m; ++c) {
    for (int side : {kXPlus, kYPlus}) {
      const int nb = grid.neighbors(c, side);
      if (nb < 0) continue;
      entries.emplace_back(c, c, 1);
      entries.emplace_back(nb, nb, 1);
      entries.emplace_back(c, nb, -1);
      entries.emplace_back(nb, c, -1);
    }
  }
  gram_.resize(m, m);
  gram_.setFromTriplets(entries.begin(), entries.end());
  llt_.compute(gram_);
  if (llt_.info() != Eigen::Success)
    throw std::runtime_error("H1Metric: factorization failed");
}

}  // namespace radtomo
