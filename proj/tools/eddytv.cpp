// Copyright eddytv contributors.
// SPDX-License-Identifier: Apache-2.0

#include "eddytv/cli.hpp"

int main(int argc, char **argv)
{
  return eddytv::run_cli(argc, argv);
}
