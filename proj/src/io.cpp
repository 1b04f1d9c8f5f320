#include "nfsf/io.hpp"

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace nfsf {

void write_text_atomic(const std::string& path, const std::string& content)
{
    std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open " + tmp);
        out << content;
        if (!out) throw std::runtime_error("write failed: " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw std::runtime_error("rename failed: " + path);
}

std::string format_double(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string snapshot_csv(const DensityField& f)
{
    std::string out = f.xg.d == 1 ? "ix,s,rho\n" : "ix,iy,s,rho\n";
    char buf[128];
    for (int x = 0; x < f.xg.size(); ++x) {
        for (int j = 0; j < f.sg.n; ++j) {
            if (f.xg.d == 1)
                std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g\n", x, f.sg.center(j), f.at(x, j));
            else
                std::snprintf(buf, sizeof(buf), "%d,%d,%.17g,%.17g\n", x / f.xg.n, x % f.xg.n,
                              f.sg.center(j), f.at(x, j));
            out += buf;
        }
    }
    return out;
}

namespace {
struct BinHeader {
    char magic[4];
    uint32_t version;
    uint32_t d, n_x, n_s;
    uint32_t reserved; // keeps the doubles 8-byte aligned
    double L, s_max, time;
    char pad[16];
};
static_assert(sizeof(BinHeader) == 64);
} // namespace

void write_snapshot_binary(const std::string& path, const DensityField& f)
{
    BinHeader h{};
    std::memcpy(h.magic, "NFSF", 4);
    h.version = 1;
    h.d = f.xg.d;
    h.n_x = f.xg.n;
    h.n_s = f.sg.n;
    h.L = f.xg.L;
    h.s_max = f.sg.s_max;
    h.time = f.time;
    std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open " + tmp);
        out.write(reinterpret_cast<const char*>(&h), sizeof(h));
        out.write(reinterpret_cast<const char*>(f.rho.data()), f.rho.size() * sizeof(double));
        if (!out) throw std::runtime_error("write failed: " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw std::runtime_error("rename failed: " + path);
}

DensityField read_snapshot_binary(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    BinHeader h{};
    in.read(reinterpret_cast<char*>(&h), sizeof(h));
    if (!in || std::memcmp(h.magic, "NFSF", 4) != 0)
        throw std::runtime_error("not an NFSF snapshot: " + path);
    if (h.version != 1) throw std::runtime_error("unsupported snapshot version");
    DensityField f(SpatialGrid((int)h.d, h.L, (int)h.n_x), ActivityGrid((int)h.n_s, h.s_max));
    f.time = h.time;
    in.read(reinterpret_cast<char*>(f.rho.data()), f.rho.size() * sizeof(double));
    if (!in) throw std::runtime_error("truncated snapshot: " + path);
    return f;
}

std::string csv_table(const std::vector<std::string>& header,
                      const std::vector<std::vector<double>>& rows)
{
    std::string out;
    for (size_t i = 0; i < header.size(); ++i) {
        out += header[i];
        out += i + 1 < header.size() ? ',' : '\n';
    }
    for (const auto& r : rows) {
        for (size_t i = 0; i < r.size(); ++i) {
            out += format_double(r[i]);
            out += i + 1 < r.size() ? ',' : '\n';
        }
    }
    return out;
}

} // namespace nfsf
