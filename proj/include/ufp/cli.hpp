#pragma once

namespace ufp {

// Entry point behind the `ufp` binary; exposed for tests.
// Exit codes: 0 success, 1 usage error, 2 runtime error.
int cli_main(int argc, const char* const* argv);

} // namespace ufp
