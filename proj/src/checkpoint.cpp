#include "painpair/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace painpair::ckpt {

namespace {

constexpr char kMagic[4] = {'P', 'P', 'C', 'K'};
constexpr uint32_t kVersion = 1;

void put_u32(std::ostream& os, uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }
void put_u64(std::ostream& os, uint64_t v) { os.write(reinterpret_cast<const char*>(&v), 8); }

uint32_t get_u32(std::istream& is) {
    uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), 4);
    return v;
}

uint64_t get_u64(std::istream& is) {
    uint64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), 8);
    return v;
}

std::vector<model::ParamView> all_views(model::ModelParams& p) {
    auto views = model::param_views(p);
    auto state = model::state_views(p);
    views.insert(views.end(), state.begin(), state.end());
    return views;
}

}  // namespace

void save_checkpoint(const std::string& path, Checkpoint& ck) {
    std::ofstream os(path, std::ios::binary);
    if (!os) fail("checkpoint: cannot open " + path + " for writing");
    os.write(kMagic, 4);
    put_u32(os, kVersion);
    put_u32(os, uint32_t(ck.params.input_size));
    put_u64(os, ck.seed);
    put_u32(os, uint32_t(ck.config_echo.size()));
    os.write(ck.config_echo.data(), std::streamsize(ck.config_echo.size()));

    auto views = all_views(ck.params);
    put_u32(os, uint32_t(views.size()));
    for (const auto& v : views) {
        put_u32(os, uint32_t(v.name.size()));
        os.write(v.name.data(), std::streamsize(v.name.size()));
        put_u32(os, uint32_t(v.shape.size()));
        size_t n = 1;
        for (long d : v.shape) {
            put_u64(os, uint64_t(d));
            n *= size_t(d);
        }
        if (n != v.data->size()) fail("checkpoint: shape/data mismatch on " + v.name);
        os.write(reinterpret_cast<const char*>(v.data->data()), std::streamsize(n * 8));
    }
    if (!os) fail("checkpoint: write to " + path + " failed");
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) fail("checkpoint: cannot open " + path);
    char magic[4] = {};
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        fail("checkpoint: " + path + " is not a checkpoint file");
    const uint32_t version = get_u32(is);
    if (version != kVersion)
        fail("checkpoint: unsupported version " + std::to_string(version) + " in " + path);
    const uint32_t input_size = get_u32(is);
    if (input_size == 0 || input_size % 8 != 0)
        fail("checkpoint: invalid input size " + std::to_string(input_size));

    Checkpoint ck;
    ck.seed = get_u64(is);
    const uint32_t echo_len = get_u32(is);
    ck.config_echo.resize(echo_len);
    is.read(ck.config_echo.data(), echo_len);

    ck.params = model::make_model(ck.seed, int(input_size));
    auto views = all_views(ck.params);
    std::vector<bool> filled(views.size(), false);

    const uint32_t nblobs = get_u32(is);
    if (nblobs != views.size())
        fail("checkpoint: expected " + std::to_string(views.size()) + " blobs, found " +
             std::to_string(nblobs));
    for (uint32_t b = 0; b < nblobs; ++b) {
        std::string name(get_u32(is), '\0');
        is.read(name.data(), std::streamsize(name.size()));
        const uint32_t ndim = get_u32(is);
        std::vector<long> shape(ndim);
        size_t n = 1;
        for (auto& d : shape) {
            d = long(get_u64(is));
            n *= size_t(d);
        }
        size_t idx = views.size();
        for (size_t i = 0; i < views.size(); ++i)
            if (views[i].name == name) {
                idx = i;
                break;
            }
        if (idx == views.size()) fail("checkpoint: unknown blob " + name);
        if (filled[idx]) fail("checkpoint: duplicate blob " + name);
        if (shape != views[idx].shape || n != views[idx].data->size())
            fail("checkpoint: shape mismatch on " + name);
        is.read(reinterpret_cast<char*>(views[idx].data->data()), std::streamsize(n * 8));
        filled[idx] = true;
    }
    if (!is) fail("checkpoint: " + path + " is truncated");
    if (is.peek() != std::ifstream::traits_type::eof())
        fail("checkpoint: trailing bytes in " + path);
    return ck;
}

}  // namespace painpair::ckpt
