#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace cgraconv {

enum class Strategy { WP, IM2COL_IP, CONV_OP, IM2COL_OP };

const char* strategy_name(Strategy s);
bool strategy_from_name(const std::string& name, Strategy& out);

// Convolution layer hyperparameters. Stride is fixed at 1 and padding at 0,
// so I = O + F - 1 on each spatial axis. groups = 1 always.
struct ConvParams {
  int C = 16;
  int K = 16;
  int Ox = 16;
  int Oy = 16;
  int Fx = 3;
  int Fy = 3;

  int Ix() const { return Ox + Fx - 1; }
  int Iy() const { return Oy + Fy - 1; }
  int64_t macs() const {
    return static_cast<int64_t>(Fx) * Fy * Ox * Oy * C * K;
  }
  bool valid() const {
    return C >= 1 && K >= 1 && Ox >= 1 && Oy >= 1 && Fx >= 1 && Fy >= 1;
  }
};

enum class Layout { CHW, HWC, KCFF, COL };

// Flat 32-bit integer tensor with an explicit memory layout.
// CHW: (c,h,w) at c*H*W + h*W + w.  HWC: (h,w,c) at h*W*C + w*C + c.
// KCFF: weights (k,c,fh,fw).  COL: a 1-D im2col patch vector.
struct Tensor {
  Layout layout = Layout::CHW;
  std::vector<int> dims;
  std::vector<uint32_t> data;

  size_t size() const { return data.size(); }
  static Tensor chw(int C, int H, int W);
  static Tensor hwc(int H, int W, int C);
  static Tensor kcff(int K, int C, int Fh, int Fw);

  uint32_t& at_chw(int c, int h, int w);
  uint32_t at_chw(int c, int h, int w) const;
  uint32_t& at_hwc(int h, int w, int c);
  uint32_t at_hwc(int h, int w, int c) const;
  uint32_t& at_kcff(int k, int c, int fh, int fw);
  uint32_t at_kcff(int k, int c, int fh, int fw) const;
};

class TensorError : public std::exception {
 public:
  explicit TensorError(std::string m) : m_(std::move(m)) {}
  const char* what() const noexcept override { return m_.c_str(); }

 private:
  std::string m_;
};

// Golden direct convolution: out[k,x,y] = sum_c sum_i sum_j
// in[c,x+i,y+j] * w[k,c,i,j], 32-bit wrapping arithmetic, stride 1, no
// padding. Input CHW [C,Ix,Iy], weights [K,C,Fx,Fy], output CHW [K,Ox,Oy].
Tensor conv2d_oracle(const Tensor& input, const Tensor& weights,
                     const ConvParams& p);

// CHW <-> HWC. Bijective; round-trip is the identity.
Tensor layout_convert(const Tensor& t, Layout target);

// Patch vector for output position (x, y), ordered (h, w, c) ascending so
// gathers from an HWC input are contiguous. Length C*Fx*Fy.
Tensor im2col_patch(const Tensor& input_hwc, int x, int y,
                    const ConvParams& p);

// Bytes to store inputs, outputs and weight filters; the im2col strategies
// additionally count their double-buffered reorder patch.
int64_t footprint_bytes(const ConvParams& p, Strategy s);

// Tensor file format: JSON header line (layout, dims) + little-endian
// 32-bit binary payload.
void save_tensor(const std::string& path, const Tensor& t);
Tensor load_tensor(const std::string& path);

}  // namespace cgraconv
