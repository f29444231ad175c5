// seqfb/cli.h

// Copyright 2026  The seqfb Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef SEQFB_CLI_H_
#define SEQFB_CLI_H_

#include <iosfwd>

namespace seqfb {

/// Command-line entry point.  Returns the process exit code: 0 success,
/// 2 configuration error, 3 data error, 4 numerical or internal failure.
int RunCli(int argc, const char *const *argv, std::ostream &out, std::ostream &err);

/// Sets the log level from the SEQFB_LOG environment variable
/// (trace, debug, info, warn, error, off; default warn).
void InitLogging();

}  // namespace seqfb

#endif  // SEQFB_CLI_H_
