#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "core/dynamics.hpp"

namespace paramprune {

// Dataset CSV: header t,z1..zn,dz1..dzn,ddz1..ddzn,tau1..taun, one row per
// sample, 17 significant digits so every value round-trips exactly.
void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& text);

// FNV-1a over the raw bytes; cache keys for content-addressed artifacts.
uint64_t content_hash(const std::string& bytes);
std::string hash_hex(uint64_t h);

// Worker cap: explicit override, else PARAMPRUNE_THREADS, else the hardware
// count. Always at least one.
int worker_count();
void set_worker_override(int n);  // n <= 0 clears the override

// Static contiguous chunking of [0, n); runs inline with a single worker.
// The first worker exception is rethrown after the join.
void parallel_for(long n, const std::function<void(long)>& fn);

}  // namespace paramprune
