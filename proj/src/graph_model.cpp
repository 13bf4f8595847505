#include "lakewatch/graph_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

namespace lakewatch {

namespace {

std::vector<double> conv2d(const std::vector<double>& in, std::size_t n, const GraphModel::Node& node) {
  const std::size_t k = node.kernel_size;
  const auto half = static_cast<long>(k / 2);
  std::vector<double> out(in.size(), 0.0);
  for (long r = 0; r < static_cast<long>(n); ++r) {
    for (long c = 0; c < static_cast<long>(n); ++c) {
      double acc = node.b;
      for (long kr = -half; kr <= half; ++kr) {
        const long rr = r + kr;
        if (rr < 0 || rr >= static_cast<long>(n)) continue;
        for (long kc = -half; kc <= half; ++kc) {
          const long cc = c + kc;
          if (cc < 0 || cc >= static_cast<long>(n)) continue;
          acc += node.kernel[static_cast<std::size_t>((kr + half) * static_cast<long>(k) + kc + half)] *
                 in[static_cast<std::size_t>(rr) * n + static_cast<std::size_t>(cc)];
        }
      }
      out[static_cast<std::size_t>(r) * n + static_cast<std::size_t>(c)] = acc;
    }
  }
  return out;
}

}  // namespace

GraphModel GraphModel::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw BackendUnavailable("cannot open model file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

GraphModel GraphModel::parse(const std::string& json_text) {
  using nlohmann::json;
  GraphModel model;
  try {
    const json doc = json::parse(json_text);
    if (doc.value("format", "") != "lakewatch-graph" || doc.value("version", 0) != 1) {
      throw BackendUnavailable("model is not a lakewatch-graph v1 document");
    }
    model.tile_size_ = doc.value("tile_size", std::size_t{256});
    model.input_scale_ = doc.value("input_scale", 1.0);
    if (model.tile_size_ == 0) throw BackendUnavailable("model tile_size must be positive");
    for (const json& j : doc.at("nodes")) {
      Node node{};
      const std::string op = j.at("op").get<std::string>();
      if (op == "conv2d") {
        node.op = Node::Op::Conv2d;
        const auto& rows = j.at("kernel");
        node.kernel_size = rows.size();
        if (node.kernel_size == 0 || node.kernel_size % 2 == 0) {
          throw BackendUnavailable("conv2d kernel must be odd and square");
        }
        for (const auto& row : rows) {
          if (row.size() != node.kernel_size) throw BackendUnavailable("conv2d kernel must be square");
          for (const auto& v : row) node.kernel.push_back(v.get<double>());
        }
        node.b = j.value("bias", 0.0);
      } else if (op == "affine") {
        node.op = Node::Op::Affine;
        node.a = j.value("scale", 1.0);
        node.b = j.value("bias", 0.0);
      } else if (op == "relu") {
        node.op = Node::Op::Relu;
      } else if (op == "sigmoid") {
        node.op = Node::Op::Sigmoid;
      } else if (op == "clamp") {
        node.op = Node::Op::Clamp;
        node.a = j.value("min", 0.0);
        node.b = j.value("max", 1.0);
      } else if (op == "constant") {
        node.op = Node::Op::Constant;
        node.a = j.at("value").get<double>();
      } else {
        throw BackendUnavailable("unsupported graph op '" + op + "'");
      }
      model.nodes_.push_back(std::move(node));
    }
  } catch (const json::exception& e) {
    throw BackendUnavailable(std::string("malformed model: ") + e.what());
  }
  if (model.nodes_.empty()) throw BackendUnavailable("model has no nodes");
  return model;
}

std::vector<double> GraphModel::infer_tile(std::span<const float> tile) const {
  const std::size_t n = tile_size_;
  if (tile.size() != n * n) throw BackendUnavailable("tile shape mismatch");
  std::vector<double> x(tile.size());
  for (std::size_t i = 0; i < tile.size(); ++i) x[i] = tile[i] * input_scale_;
  for (const Node& node : nodes_) {
    switch (node.op) {
      case Node::Op::Conv2d: x = conv2d(x, n, node); break;
      case Node::Op::Affine:
        for (double& v : x) v = node.a * v + node.b;
        break;
      case Node::Op::Relu:
        for (double& v : x) v = std::max(0.0, v);
        break;
      case Node::Op::Sigmoid:
        for (double& v : x) v = 1.0 / (1.0 + std::exp(-v));
        break;
      case Node::Op::Clamp:
        for (double& v : x) v = std::clamp(v, node.a, node.b);
        break;
      case Node::Op::Constant: std::fill(x.begin(), x.end(), node.a); break;
    }
  }
  for (double v : x) {
    if (!(v >= 0.0 && v <= 1.0)) throw BackendUnavailable("model output outside [0, 1]");
  }
  return x;
}

GraphModelBackend::GraphModelBackend(const std::filesystem::path& model_path, unsigned workers)
    : model_(GraphModel::load(model_path)),
      name_(model_path.stem().string()),
      workers_(std::max(1u, workers)) {}

ProbabilityMap GraphModelBackend::segment(const RasterGrid& grid) const {
  const std::size_t n = model_.tile_size();
  if (grid.width() % n != 0 || grid.height() % n != 0) {
    throw DataError("shape mismatch: " + std::to_string(grid.width()) + "x" +
                    std::to_string(grid.height()) + " is not a multiple of tile size " +
                    std::to_string(n));
  }
  const std::size_t tiles_x = grid.width() / n, tiles_y = grid.height() / n;
  const std::size_t n_tiles = tiles_x * tiles_y;

  ProbabilityMap pm;
  pm.width = grid.width();
  pm.height = grid.height();
  pm.probs.assign(grid.size(), 0.0);
  pm.validity.assign(grid.validity().begin(), grid.validity().end());
  const auto data = grid.data();

  // Each tile writes a disjoint region, so workers never share output cells.
  auto run_tile = [&](std::size_t t) {
    const std::size_t tx = t % tiles_x, ty = t / tiles_x;
    std::vector<float> tile(n * n);
    for (std::size_t r = 0; r < n; ++r) {
      const std::size_t src = (ty * n + r) * grid.width() + tx * n;
      std::copy_n(data.begin() + static_cast<std::ptrdiff_t>(src), n, tile.begin() + static_cast<std::ptrdiff_t>(r * n));
    }
    const std::vector<double> probs = model_.infer_tile(tile);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < n; ++c) {
        const std::size_t dst = (ty * n + r) * grid.width() + tx * n + c;
        pm.probs[dst] = pm.validity[dst] ? probs[r * n + c] : 0.0;
      }
    }
    tiles_inferred_.fetch_add(1);
  };

  const unsigned workers = std::min<unsigned>(workers_, static_cast<unsigned>(n_tiles));
  if (workers <= 1) {
    for (std::size_t t = 0; t < n_tiles; ++t) run_tile(t);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    {
      std::vector<std::jthread> pool;
      for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
          for (std::size_t t = next++; t < n_tiles; t = next++) {
            try {
              run_tile(t);
            } catch (...) {
              std::lock_guard lock(failure_mutex);
              if (!failure) failure = std::current_exception();
            }
          }
        });
      }
    }
    if (failure) std::rethrow_exception(failure);
  }
  return pm;
}

ProbabilityMap run_model_backend(const RasterGrid& grid, const std::filesystem::path& model_path) {
  return GraphModelBackend(model_path).segment(grid);
}

}  // namespace lakewatch
