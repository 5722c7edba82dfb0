// Generates a three-attribute hierarchy, probes it with 2/4/8 clusters and
// prints the order in which the attributes split the space.

#include <iomanip>
#include <iostream>

#include "subdisc/subdisc.hpp"

int main() {
  const subdisc::HierarchySpec spec = subdisc::default_hierarchy_spec();
  const subdisc::Dataset data = subdisc::generate(spec);

  const std::vector<std::string> attributes{"skin_tone", "gender", "age"};
  subdisc::KMeansConfig config;
  config.rng_seed = 7;
  const auto report = subdisc::hierarchy_probe(data, attributes, {2, 4, 8}, config);

  std::cout << std::fixed << std::setprecision(3);
  for (const auto& level : report.levels) {
    std::cout << level.cluster_count << " clusters:";
    for (const auto& a : level.resolved) std::cout << ' ' << a;
    std::cout << "  accuracy " << level.overall_accuracy << '\n';
  }
  std::cout << "dominance:";
  for (const auto& a : report.dominance_order) std::cout << ' ' << a;
  std::cout << '\n';
}
