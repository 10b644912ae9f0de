#include "cgraconv/tensor.hpp"

#include <fstream>

#include "json.hpp"

namespace cgraconv {

const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::WP: return "wp";
    case Strategy::IM2COL_IP: return "im2col-ip";
    case Strategy::CONV_OP: return "conv-op";
    case Strategy::IM2COL_OP: return "im2col-op";
  }
  return "?";
}

bool strategy_from_name(const std::string& name, Strategy& out) {
  if (name == "wp") out = Strategy::WP;
  else if (name == "im2col-ip") out = Strategy::IM2COL_IP;
  else if (name == "conv-op") out = Strategy::CONV_OP;
  else if (name == "im2col-op") out = Strategy::IM2COL_OP;
  else return false;
  return true;
}

Tensor Tensor::chw(int C, int H, int W) {
  Tensor t;
  t.layout = Layout::CHW;
  t.dims = {C, H, W};
  t.data.assign(static_cast<size_t>(C) * H * W, 0);
  return t;
}

Tensor Tensor::hwc(int H, int W, int C) {
  Tensor t;
  t.layout = Layout::HWC;
  t.dims = {H, W, C};
  t.data.assign(static_cast<size_t>(C) * H * W, 0);
  return t;
}

Tensor Tensor::kcff(int K, int C, int Fh, int Fw) {
  Tensor t;
  t.layout = Layout::KCFF;
  t.dims = {K, C, Fh, Fw};
  t.data.assign(static_cast<size_t>(K) * C * Fh * Fw, 0);
  return t;
}

uint32_t& Tensor::at_chw(int c, int h, int w) {
  return data[(static_cast<size_t>(c) * dims[1] + h) * dims[2] + w];
}
uint32_t Tensor::at_chw(int c, int h, int w) const {
  return data[(static_cast<size_t>(c) * dims[1] + h) * dims[2] + w];
}
uint32_t& Tensor::at_hwc(int h, int w, int c) {
  return data[(static_cast<size_t>(h) * dims[1] + w) * dims[2] + c];
}
uint32_t Tensor::at_hwc(int h, int w, int c) const {
  return data[(static_cast<size_t>(h) * dims[1] + w) * dims[2] + c];
}
uint32_t& Tensor::at_kcff(int k, int c, int fh, int fw) {
  return data[((static_cast<size_t>(k) * dims[1] + c) * dims[2] + fh) * dims[3] + fw];
}
uint32_t Tensor::at_kcff(int k, int c, int fh, int fw) const {
  return data[((static_cast<size_t>(k) * dims[1] + c) * dims[2] + fh) * dims[3] + fw];
}

Tensor conv2d_oracle(const Tensor& input, const Tensor& weights,
                     const ConvParams& p) {
  if (input.layout != Layout::CHW || input.dims.size() != 3 ||
      input.dims[0] != p.C || input.dims[1] != p.Ix() || input.dims[2] != p.Iy())
    throw TensorError("conv2d_oracle: input dims mismatch");
  if (weights.layout != Layout::KCFF || weights.dims.size() != 4 ||
      weights.dims[0] != p.K || weights.dims[1] != p.C ||
      weights.dims[2] != p.Fx || weights.dims[3] != p.Fy)
    throw TensorError("conv2d_oracle: weight dims mismatch");

  Tensor out = Tensor::chw(p.K, p.Ox, p.Oy);
  for (int k = 0; k < p.K; ++k)
    for (int x = 0; x < p.Ox; ++x)
      for (int y = 0; y < p.Oy; ++y) {
        uint32_t acc = 0;
        for (int c = 0; c < p.C; ++c)
          for (int i = 0; i < p.Fx; ++i)
            for (int j = 0; j < p.Fy; ++j)
              acc += input.at_chw(c, x + i, y + j) * weights.at_kcff(k, c, i, j);
        out.at_chw(k, x, y) = acc;
      }
  return out;
}

Tensor layout_convert(const Tensor& t, Layout target) {
  if (t.layout == target) return t;
  if (t.layout == Layout::CHW && target == Layout::HWC) {
    int C = t.dims[0], H = t.dims[1], W = t.dims[2];
    Tensor out = Tensor::hwc(H, W, C);
    for (int c = 0; c < C; ++c)
      for (int h = 0; h < H; ++h)
        for (int w = 0; w < W; ++w) out.at_hwc(h, w, c) = t.at_chw(c, h, w);
    return out;
  }
  if (t.layout == Layout::HWC && target == Layout::CHW) {
    int H = t.dims[0], W = t.dims[1], C = t.dims[2];
    Tensor out = Tensor::chw(C, H, W);
    for (int c = 0; c < C; ++c)
      for (int h = 0; h < H; ++h)
        for (int w = 0; w < W; ++w) out.at_chw(c, h, w) = t.at_hwc(h, w, c);
    return out;
  }
  throw TensorError("layout_convert: undefined conversion");
}

Tensor im2col_patch(const Tensor& input_hwc, int x, int y,
                    const ConvParams& p) {
  if (input_hwc.layout != Layout::HWC)
    throw TensorError("im2col_patch: input must be HWC");
  if (x < 0 || x >= p.Ox || y < 0 || y >= p.Oy)
    throw TensorError("im2col_patch: output position out of range");
  Tensor col;
  col.layout = Layout::COL;
  col.dims = {p.C * p.Fx * p.Fy};
  col.data.reserve(static_cast<size_t>(p.C) * p.Fx * p.Fy);
  for (int i = 0; i < p.Fx; ++i)
    for (int j = 0; j < p.Fy; ++j)
      for (int c = 0; c < p.C; ++c)
        col.data.push_back(input_hwc.at_hwc(x + i, y + j, c));
  return col;
}

int64_t footprint_bytes(const ConvParams& p, Strategy s) {
  int64_t words = static_cast<int64_t>(p.C) * p.Ix() * p.Iy() +
                  static_cast<int64_t>(p.K) * p.Ox * p.Oy +
                  static_cast<int64_t>(p.K) * p.C * p.Fx * p.Fy;
  if (s == Strategy::IM2COL_IP || s == Strategy::IM2COL_OP)
    words += 2LL * p.C * p.Fx * p.Fy;  // double-buffered reorder patch
  return 4 * words;
}

void save_tensor(const std::string& path, const Tensor& t) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw TensorError("cannot open for write: " + path);
  nlohmann::json j;
  switch (t.layout) {
    case Layout::CHW: j["layout"] = "chw"; break;
    case Layout::HWC: j["layout"] = "hwc"; break;
    case Layout::KCFF: j["layout"] = "kcff"; break;
    case Layout::COL: j["layout"] = "col"; break;
  }
  j["dims"] = t.dims;
  std::string header = j.dump();
  out << header << "\n";
  for (uint32_t w : t.data) {
    unsigned char b[4] = {static_cast<unsigned char>(w & 0xff),
                          static_cast<unsigned char>((w >> 8) & 0xff),
                          static_cast<unsigned char>((w >> 16) & 0xff),
                          static_cast<unsigned char>((w >> 24) & 0xff)};
    out.write(reinterpret_cast<char*>(b), 4);
  }
}

Tensor load_tensor(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TensorError("cannot open: " + path);
  std::string header;
  std::getline(in, header);
  nlohmann::json j = nlohmann::json::parse(header);
  Tensor t;
  std::string layout = j.at("layout");
  if (layout == "chw") t.layout = Layout::CHW;
  else if (layout == "hwc") t.layout = Layout::HWC;
  else if (layout == "kcff") t.layout = Layout::KCFF;
  else if (layout == "col") t.layout = Layout::COL;
  else throw TensorError("bad layout in tensor header");
  t.dims = j.at("dims").get<std::vector<int>>();
  size_t n = 1;
  for (int d : t.dims) n *= static_cast<size_t>(d);
  t.data.resize(n);
  for (size_t i = 0; i < n; ++i) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4))
      throw TensorError("tensor payload truncated");
    t.data[i] = static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
                (static_cast<uint32_t>(b[2]) << 16) |
                (static_cast<uint32_t>(b[3]) << 24);
  }
  return t;
}

}  // namespace cgraconv
