// Draws one dataset from a sparse additive model and runs the exhaustive search.

#include <iostream>

#include "addsel/selection.hpp"
#include "addsel/simulate.hpp"

int main() {
    using namespace addsel;
    const int q = 6, s = 2, n = 300;
    const AdditiveModel model = gen_model(q, s, 2.0, 50.0, 1.0, 0.0, 11);
    const DesignLaw law = DesignLaw::independent_uniform();
    const Matrix X = gen_design(law, n, q, 12);
    const Vector Y = gen_response(model, X, 13);

    const BasisSpec spec = BasisSpec::uniform(q, 6);
    const SelectionResult res = select_exhaustive(Dataset{X, Y}, spec, 3, 0.25);

    std::cout << "true support: " << to_string(model.J0) << "\n";
    std::cout << "selected:     " << to_string(res.chosen) << "\n";
    for (const auto& c : res.criterion)
        if (c.J.size() <= 2) std::cout << "  " << to_string(c.J) << "  " << c.value << "\n";
}
