#pragma once

// Umbrella header: the full library.

#include "rational.hpp"
#include "ty.hpp"
#include "measure.hpp"
#include "ast.hpp"
#include "typecheck.hpp"
#include "printer.hpp"
#include "parser.hpp"
#include "eval.hpp"
#include "transforms.hpp"
#include "ergodicity.hpp"
#include "corpus.hpp"
#include "cli.hpp"
