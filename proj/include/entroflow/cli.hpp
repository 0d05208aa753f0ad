#pragma once

namespace entroflow::cli {

/// Exit codes: 0 all checks passed, 1 a check failed, 2 usage or config
/// error, 3 numerical non-convergence.
int run(int argc, char** argv);

}  // namespace entroflow::cli
