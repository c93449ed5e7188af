// Copyright 2026 the ger authors
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>
