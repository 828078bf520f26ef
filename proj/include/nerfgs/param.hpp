#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "nerfgs/common.hpp"

namespace nerfgs {

// One named trainable tensor with its gradient and Adam state. Gradients
// accumulate additively; the optimizer zeroes them after each step.
struct ParamBlock {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<real> values;
  std::vector<real> grads;
  std::vector<real> adam_m;
  std::vector<real> adam_v;
  std::int64_t step_count = 0;

  ParamBlock() = default;
  ParamBlock(std::string name_, std::vector<std::size_t> shape_) : name(std::move(name_)), shape(std::move(shape_)) {
    resize_to_shape();
  }

  std::size_t size() const { return values.size(); }

  static std::size_t shape_product(const std::vector<std::size_t>& s) {
    std::size_t n = 1;
    for (auto d : s) n *= d;
    return n;
  }

  void resize_to_shape() {
    std::size_t n = shape_product(shape);
    values.assign(n, 0);
    grads.assign(n, 0);
    adam_m.assign(n, 0);
    adam_v.assign(n, 0);
  }

  void zero_grads() { std::fill(grads.begin(), grads.end(), real(0)); }

  // Row helpers for blocks shaped [rows, row_dim] whose rows track a dynamic
  // set (per-Gaussian residuals). Adam moments follow the surviving rows.
  std::size_t row_dim() const { return shape.size() == 2 ? shape[1] : 1; }

  void append_rows(std::size_t count) {
    require(shape.size() == 2, Errc::dimension_mismatch, name + ": append_rows needs a 2-d block");
    shape[0] += count;
    std::size_t n = shape_product(shape);
    values.resize(n, 0);
    grads.resize(n, 0);
    adam_m.resize(n, 0);
    adam_v.resize(n, 0);
  }

  void keep_rows(const std::vector<char>& keep) {
    require(shape.size() == 2 && keep.size() == shape[0], Errc::dimension_mismatch,
            name + ": keep mask size mismatch");
    std::size_t dim = shape[1];
    std::size_t out = 0;
    for (std::size_t r = 0; r < keep.size(); ++r) {
      if (!keep[r]) continue;
      if (out != r) {
        for (std::size_t c = 0; c < dim; ++c) {
          values[out * dim + c] = values[r * dim + c];
          grads[out * dim + c] = grads[r * dim + c];
          adam_m[out * dim + c] = adam_m[r * dim + c];
          adam_v[out * dim + c] = adam_v[r * dim + c];
        }
      }
      ++out;
    }
    shape[0] = out;
    std::size_t n = shape_product(shape);
    values.resize(n);
    grads.resize(n);
    adam_m.resize(n);
    adam_v.resize(n);
  }
};

// Owns every trainable block; block ids index the parallel gradient buffers.
class ParamRegistry {
public:
  ParamBlock& add(std::string name, std::vector<std::size_t> shape) {
    blocks_.push_back(std::make_unique<ParamBlock>(std::move(name), std::move(shape)));
    return *blocks_.back();
  }

  std::size_t count() const { return blocks_.size(); }
  ParamBlock& block(std::size_t i) { return *blocks_[i]; }
  const ParamBlock& block(std::size_t i) const { return *blocks_[i]; }

  ParamBlock* find(const std::string& name) {
    for (auto& b : blocks_)
      if (b->name == name) return b.get();
    return nullptr;
  }

  int index_of(const ParamBlock& b) const {
    for (std::size_t i = 0; i < blocks_.size(); ++i)
      if (blocks_[i].get() == &b) return int(i);
    return -1;
  }

  void zero_all_grads() {
    for (auto& b : blocks_) b->zero_grads();
  }

private:
  std::vector<std::unique_ptr<ParamBlock>> blocks_;
};

// Per-worker dense gradient buffers, merged into ParamBlock::grads in worker
// order by the coordinator (bit-deterministic for a fixed worker count).
class GradBuffers {
public:
  GradBuffers(ParamRegistry& reg, int workers) : reg_(&reg), workers_(workers) {
    buf_.resize(std::size_t(workers));
    touched_.resize(std::size_t(workers));
    for (int w = 0; w < workers; ++w) {
      buf_[w].resize(reg.count());
      touched_[w].assign(reg.count(), 0);
    }
  }

  // Worker-local dense buffer for a block, allocated and zeroed on first use
  // per pass.
  std::vector<real>& at(int worker, std::size_t block_id) {
    auto& v = buf_[worker][block_id];
    if (!touched_[worker][block_id]) {
      v.assign(reg_->block(block_id).size(), real(0));
      touched_[worker][block_id] = 1;
    }
    return v;
  }

  void merge_and_reset() {
    for (std::size_t b = 0; b < reg_->count(); ++b) {
      auto& g = reg_->block(b).grads;
      for (int w = 0; w < workers_; ++w) {
        if (!touched_[w][b]) continue;
        const auto& src = buf_[w][b];
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += src[i];
        touched_[w][b] = 0;
      }
    }
  }

  int workers() const { return workers_; }

private:
  ParamRegistry* reg_;
  int workers_;
  std::vector<std::vector<std::vector<real>>> buf_;
  std::vector<std::vector<char>> touched_;
};

}  // namespace nerfgs
