#include <catch2/catch_amalgamated.hpp>

#include "symspin/flat_model.hpp"

using namespace symspin;

// The six-dimensional walk exercises block decompositions up to form degree
// six and is by far the longest-running check, so it lives in its own binary.
TEST_CASE("both twistor complexes close mode by mode in six dimensions") {
  auto S = SpinorSpace::make(3, 9);
  Prng rng(7);
  const auto modes = random_modes(S->n, 1, rng);
  const TwistorComplexReport rep = twistor_complex_residuals(S, modes, 1, 2, 19);

  REQUIRE((int)rep.composite.size() == 2 * S->n - 1);
  CHECK(rep.gap_index == S->n - 1);
  INFO("worst=" << rep.worst() << " gap=" << rep.gap);
  CHECK(rep.worst() < 1e-9);
  CHECK(rep.gap > 0.1);
}
