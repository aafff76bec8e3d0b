// SPDX-License-Identifier: Apache-2.0
#include "datactl/cli.hpp"

int main(int argc, char** argv) { return datactl::cli::run(argc, argv); }
