#pragma once

namespace jointmodel
{

// Entry point of the command-line tool. Returns the process exit status:
// 0 on success, 2 on usage errors, 1 on any other error.
int cli_dispatch(int argc, const char* const* argv);

}  // namespace jointmodel
