#pragma once

#include <string>

#include "mandala/ast.hpp"

namespace mandala {

// Renders a module back to source. The output re-parses to a structurally
// identical AST.
std::string pretty_print(const AstModule& m);

}  // namespace mandala
