// Copyright 2026 The autot2i Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "autot2i/app.hpp"

int main(int argc, char** argv) { return autot2i::run_cli(argc, argv, std::cout, std::cerr); }
