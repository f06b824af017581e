#include "core/io_util.hpp"

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>
#include <vector>

#include "core/model.hpp"

namespace paramprune {
namespace {

void append_num(std::string& s, double v) {
  char buf[32];
  snprintf(buf, sizeof buf, "%.17g", v);
  s += buf;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    size_t comma = line.find(',', start);
    std::string field = line.substr(
        start, comma == std::string::npos ? std::string::npos : comma - start);
    size_t a = field.find_first_not_of(" \t\r");
    size_t b = field.find_last_not_of(" \t\r");
    out.push_back(a == std::string::npos ? "" : field.substr(a, b - a + 1));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

double parse_num(const std::string& s, long row) {
  char* end = nullptr;
  double v = strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0')
    throw ConfigError("dataset csv: bad number '" + s + "' in row " +
                      std::to_string(row));
  return v;
}

std::atomic<int> g_worker_override{0};

}  // namespace

void save_dataset(const Dataset& ds, const std::string& path) {
  const int n = ds.n_dof();
  std::string s = "t";
  const char* stems[] = {"z", "dz", "ddz", "tau"};
  for (const char* stem : stems)
    for (int i = 1; i <= n; ++i) s += "," + std::string(stem) + std::to_string(i);
  s += "\n";
  for (size_t i = 0; i < ds.samples.size(); ++i) {
    append_num(s, ds.t[i]);
    const ExtendedStateSample& smp = ds.samples[i];
    for (const Eigen::VectorXd* v : {&smp.z, &smp.dz, &smp.ddz, &smp.tau})
      for (int c = 0; c < n; ++c) {
        s += ',';
        append_num(s, (*v)(c));
      }
    s += "\n";
  }
  write_file(path, s);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read " + path);
  std::string line;
  if (!std::getline(f, line)) throw ConfigError("dataset csv: empty file " + path);
  std::vector<std::string> head = split_csv(line);
  if (head.size() < 5 || (head.size() - 1) % 4 != 0)
    throw ConfigError("dataset csv: header must be t,z1..zn,dz1..dzn,ddz1..ddzn,tau1..taun");
  const int n = (int)(head.size() - 1) / 4;
  if (head[0] != "t" || head[1] != "z1" || head[1 + n] != "dz1" ||
      head[1 + 2 * n] != "ddz1" || head[1 + 3 * n] != "tau1")
    throw ConfigError("dataset csv: unexpected header layout in " + path);

  Dataset ds;
  long row = 1;
  while (std::getline(f, line)) {
    ++row;
    if (line.empty()) continue;
    std::vector<std::string> cells = split_csv(line);
    if (cells.size() != head.size())
      throw ConfigError("dataset csv: row " + std::to_string(row) + " has " +
                        std::to_string(cells.size()) + " fields, expected " +
                        std::to_string(head.size()));
    ds.t.push_back(parse_num(cells[0], row));
    ExtendedStateSample s;
    for (Eigen::VectorXd* v : {&s.z, &s.dz, &s.ddz, &s.tau}) v->resize(n);
    for (int c = 0; c < n; ++c) {
      s.z(c) = parse_num(cells[1 + c], row);
      s.dz(c) = parse_num(cells[1 + n + c], row);
      s.ddz(c) = parse_num(cells[1 + 2 * n + c], row);
      s.tau(c) = parse_num(cells[1 + 3 * n + c], row);
    }
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot read " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write " + path);
  f << text;
  if (!f) throw ConfigError("write failed for " + path);
}

uint64_t content_hash(const std::string& bytes) {
  uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hash_hex(uint64_t h) {
  char buf[17];
  snprintf(buf, sizeof buf, "%016llx", (unsigned long long)h);
  return buf;
}

int worker_count() {
  int o = g_worker_override.load();
  if (o > 0) return o;
  if (const char* env = std::getenv("PARAMPRUNE_THREADS")) {
    int n = atoi(env);
    if (n > 0) return n;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : (int)hw;
}

void set_worker_override(int n) { g_worker_override.store(n > 0 ? n : 0); }

void parallel_for(long n, const std::function<void(long)>& fn) {
  const long w = std::min<long>(worker_count(), n);
  if (w <= 1) {
    for (long i = 0; i < n; ++i) fn(i);
    return;
  }
  const long chunk = (n + w - 1) / w;
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errs((size_t)w);
  for (long t = 0; t < w; ++t) {
    const long b = t * chunk, e = std::min(n, b + chunk);
    pool.emplace_back([&, b, e, t] {
      try {
        for (long i = b; i < e; ++i) fn(i);
      } catch (...) {
        errs[(size_t)t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errs)
    if (e) std::rethrow_exception(e);
}

}  // namespace paramprune
