#include "choreo/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace choreo {

void CheckpointData::add(const std::string& name, std::vector<int64_t> shape,
                         std::vector<float> blob) {
    int64_t n = 1;
    for (int64_t d : shape) n *= d;
    if (n != static_cast<int64_t>(blob.size()))
        throw ConfigError("checkpoint: blob size does not match shape for '" + name + "'");
    names.push_back(name);
    shapes.push_back(std::move(shape));
    blobs.push_back(std::move(blob));
}

const std::vector<float>* CheckpointData::find(const std::string& name) const {
    for (size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return &blobs[i];
    return nullptr;
}

void save_checkpoint(const std::string& path, const CheckpointData& data) {
    nlohmann::json manifest;
    manifest["kind"] = data.kind;
    manifest["config_hash"] = data.config_hash;
    manifest["step"] = data.step;
    nlohmann::json params = nlohmann::json::array();
    for (size_t i = 0; i < data.names.size(); ++i)
        params.push_back({{"name", data.names[i]}, {"shape", data.shapes[i]}});
    manifest["params"] = params;
    std::string mstr = manifest.dump();

    std::string buf;
    buf += "CKPT";
    auto put_u64 = [&buf](uint64_t v) {
        for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    };
    put_u64(1);  // version
    put_u64(mstr.size());
    buf += mstr;
    for (const auto& blob : data.blobs) {
        size_t off = buf.size();
        buf.resize(off + blob.size() * 4);
        std::memcpy(buf.data() + off, blob.data(), blob.size() * 4);
    }

    std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw DataError("cannot open for write: " + tmp);
        f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
        if (!f) throw DataError("write failed: " + tmp);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw DataError("rename failed for " + path + ": " + ec.message());
}

CheckpointData load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open checkpoint: " + path);
    std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (buf.size() < 20 || std::memcmp(buf.data(), "CKPT", 4) != 0)
        throw DataError(path + ": not a checkpoint file");
    auto get_u64 = [&buf](size_t off) {
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<uint64_t>(static_cast<unsigned char>(buf[off + i])) << (8 * i);
        return v;
    };
    uint64_t version = get_u64(4);
    if (version != 1) throw DataError(path + ": unsupported checkpoint version");
    uint64_t mlen = get_u64(12);
    if (buf.size() < 20 + mlen) throw DataError(path + ": truncated manifest");
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(buf.substr(20, mlen));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path + ": manifest parse error: " + e.what());
    }
    CheckpointData data;
    data.kind = manifest.at("kind").get<std::string>();
    data.config_hash = manifest.at("config_hash").get<std::string>();
    data.step = manifest.at("step").get<int64_t>();
    size_t off = 20 + mlen;
    for (const auto& p : manifest.at("params")) {
        std::string name = p.at("name").get<std::string>();
        std::vector<int64_t> shape = p.at("shape").get<std::vector<int64_t>>();
        int64_t n = 1;
        for (int64_t d : shape) n *= d;
        if (off + n * 4 > buf.size())
            throw DataError(path + ": payload ends early at parameter '" + name + "'");
        std::vector<float> blob(n);
        std::memcpy(blob.data(), buf.data() + off, n * 4);
        off += n * 4;
        data.add(name, std::move(shape), std::move(blob));
    }
    if (off != buf.size()) throw DataError(path + ": trailing bytes after payload");
    return data;
}

CheckpointData pack_params(const std::string& kind, const std::string& config_hash, int64_t step,
                           const std::vector<NamedParam>& params, const Adam::State* opt) {
    CheckpointData data;
    data.kind = kind;
    data.config_hash = config_hash;
    data.step = step;
    for (const auto& p : params)
        data.add(p.name, p.tensor.shape(),
                 std::vector<float>(p.tensor.data(), p.tensor.data() + p.tensor.size()));
    if (opt) {
        if (opt->m.size() != params.size())
            throw ConfigError("checkpoint: optimizer state does not match parameter list");
        for (size_t i = 0; i < params.size(); ++i) {
            data.add(params[i].name + "#adam_m", params[i].tensor.shape(), opt->m[i]);
            data.add(params[i].name + "#adam_v", params[i].tensor.shape(), opt->v[i]);
        }
        data.add("#adam_step", {1}, {static_cast<float>(opt->step)});
    }
    return data;
}

Adam::State unpack_params(const CheckpointData& data, const std::vector<NamedParam>& params) {
    for (const auto& p : params) {
        const std::vector<float>* blob = data.find(p.name);
        if (!blob) throw DataError("checkpoint: missing parameter '" + p.name + "'");
        if (static_cast<int64_t>(blob->size()) != p.tensor.size())
            throw DataError("checkpoint: size mismatch for '" + p.name + "'");
        Tensor t = p.tensor;  // shared handle
        std::copy(blob->begin(), blob->end(), t.data());
    }
    Adam::State state;
    if (const std::vector<float>* s = data.find("#adam_step")) {
        state.step = static_cast<int64_t>((*s)[0]);
        for (const auto& p : params) {
            const std::vector<float>* m = data.find(p.name + "#adam_m");
            const std::vector<float>* v = data.find(p.name + "#adam_v");
            if (!m || !v) throw DataError("checkpoint: incomplete optimizer state");
            state.m.push_back(*m);
            state.v.push_back(*v);
        }
    }
    return state;
}

}  // namespace choreo
