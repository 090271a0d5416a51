#include <iostream>
#include <string>

#include "ergolab/accept.hpp"

int main(int argc, char** argv) {
    const std::string out_dir = argc > 1 ? argv[1] : "acceptance_out";
    int fails = 0;
    try {
        const auto results = ergolab::run_acceptance(out_dir, std::cout);
        for (const auto& r : results)
            if (!r.pass) ++fails;
    } catch (const std::exception& e) {
        std::cerr << "acceptance aborted: " << e.what() << "\n";
        return 3;
    }
    return fails == 0 ? 0 : 1;
}
