#include "am/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <unordered_set>

namespace am::ad {

namespace {

Var make(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backprop) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->parents = std::move(parents);
    n->backprop = std::move(backprop);
    return n;
}

void check_same_shape(const Var& a, const Var& b, const char* op) {
    if (!a->value.same_shape(b->value))
        throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;

}  // namespace

Var leaf(Tensor v) { return make(std::move(v), {}, nullptr); }

Var scalar(double v) { return leaf(Tensor::scalar(v)); }

void backward(const Var& root) {
    if (!root) throw std::invalid_argument("backward: null root");
    if (root->value.numel() != 1)
        throw std::invalid_argument("backward: root must be a single element");

    // Iterative post-order DFS; parent order makes the pass deterministic.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(root.get(), 0);
    visited.insert(root.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* p = node->parents[next].get();
            ++next;
            if (visited.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    for (Node* n : order) {
        if (n->grad.numel() != n->value.numel() || !n->grad.same_shape(n->value))
            n->grad = Tensor(n->value.shape());
        else
            n->grad.fill(0.0);
    }
    root->grad.fill(1.0);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backprop) n->backprop(*n);
    }
}

Var add(const Var& a, const Var& b) {
    check_same_shape(a, b, "add");
    Tensor out = a->value;
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] += b->value[i];
    return make(std::move(out), {a, b}, [](Node& self) {
        auto& ga = self.parents[0]->grad;
        auto& gb = self.parents[1]->grad;
        for (std::int64_t i = 0; i < self.grad.numel(); ++i) {
            ga[i] += self.grad[i];
            gb[i] += self.grad[i];
        }
    });
}

Var sub(const Var& a, const Var& b) {
    check_same_shape(a, b, "sub");
    Tensor out = a->value;
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] -= b->value[i];
    return make(std::move(out), {a, b}, [](Node& self) {
        auto& ga = self.parents[0]->grad;
        auto& gb = self.parents[1]->grad;
        for (std::int64_t i = 0; i < self.grad.numel(); ++i) {
            ga[i] += self.grad[i];
            gb[i] -= self.grad[i];
        }
    });
}

Var mul(const Var& a, const Var& b) {
    check_same_shape(a, b, "mul");
    Tensor out = a->value;
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] *= b->value[i];
    return make(std::move(out), {a, b}, [](Node& self) {
        auto& pa = self.parents[0];
        auto& pb = self.parents[1];
        for (std::int64_t i = 0; i < self.grad.numel(); ++i) {
            pa->grad[i] += self.grad[i] * pb->value[i];
            pb->grad[i] += self.grad[i] * pa->value[i];
        }
    });
}

Var scale(const Var& a, double c) {
    Tensor out = a->value;
    for (auto& x : out.vec()) x *= c;
    return make(std::move(out), {a}, [c](Node& self) {
        auto& ga = self.parents[0]->grad;
        for (std::int64_t i = 0; i < self.grad.numel(); ++i) ga[i] += c * self.grad[i];
    });
}

Var add_rowvec(const Var& x, const Var& v) {
    const std::int64_t m = x->value.rows(), n = x->value.cols();
    if (v->value.numel() != n) throw std::invalid_argument("add_rowvec: length mismatch");
    Tensor out = x->value;
    for (std::int64_t i = 0; i < m; ++i)
        for (std::int64_t j = 0; j < n; ++j) out[i * n + j] += v->value[j];
    return make(std::move(out), {x, v}, [m, n](Node& self) {
        auto& gx = self.parents[0]->grad;
        auto& gv = self.parents[1]->grad;
        for (std::int64_t i = 0; i < m; ++i)
            for (std::int64_t j = 0; j < n; ++j) {
                gx[i * n + j] += self.grad[i * n + j];
                gv[j] += self.grad[i * n + j];
            }
    });
}

Var sub_colvec(const Var& x, const Var& c) {
    const std::int64_t m = x->value.rows(), n = x->value.cols();
    if (c->value.numel() != m) throw std::invalid_argument("sub_colvec: length mismatch");
    Tensor out = x->value;
    for (std::int64_t i = 0; i < m; ++i)
        for (std::int64_t j = 0; j < n; ++j) out[i * n + j] -= c->value[i];
    return make(std::move(out), {x, c}, [m, n](Node& self) {
        auto& gx = self.parents[0]->grad;
        auto& gc = self.parents[1]->grad;
        for (std::int64_t i = 0; i < m; ++i)
            for (std::int64_t j = 0; j < n; ++j) {
                gx[i * n + j] += self.grad[i * n + j];
                gc[i] -= self.grad[i * n + j];
            }
    });
}

Var matmul(const Var& a, const Var& b) {
    Tensor out = am::matmul(a->value, b->value);
    return make(std::move(out), {a, b}, [](Node& self) {
        const Tensor& av = self.parents[0]->value;
        const Tensor& bv = self.parents[1]->value;
        Tensor& ga = self.parents[0]->grad;
        Tensor& gb = self.parents[1]->grad;
        const std::int64_t m = av.dim(0), k = av.dim(1), n = bv.dim(1);
        // dA += dC * B^T
        for (std::int64_t i = 0; i < m; ++i)
            for (std::int64_t p = 0; p < k; ++p) {
                double s = 0.0;
                for (std::int64_t j = 0; j < n; ++j)
                    s += self.grad[i * n + j] * bv[p * n + j];
                ga[i * k + p] += s;
            }
        // dB += A^T * dC
        for (std::int64_t p = 0; p < k; ++p)
            for (std::int64_t i = 0; i < m; ++i) {
                const double av_ip = av[i * k + p];
                for (std::int64_t j = 0; j < n; ++j)
                    gb[p * n + j] += av_ip * self.grad[i * n + j];
            }
    });
}

Var exp_(const Var& a) {
    Tensor out = a->value;
    for (auto& x : out.vec()) x = std::exp(x);
    return make(std::move(out), {a}, [](Node& self) {
        auto& ga = self.parents[0]->grad;
        for (std::int64_t i = 0; i < self.grad.numel(); ++i)
            ga[i] += self.grad[i] * self.value[i];
    });
}

Var log_(const Var& a) {
    Tensor out = a->value;
    for (auto& x : out.vec()) x = std::log(x);
    return make(std::move(out), {a}, [](Node& self) {
        auto& pa = self.parents[0];
        for (std::int64_t i = 0; i < self.grad.numel(); ++i)
            pa->grad[i] += self.grad[i] / pa->value[i];
    });
}

Var gelu(const Var& a) {
    Tensor out = a->value;
    for (auto& x : out.vec()) {
        const double u = kGeluC * (x + kGeluA * x * x * x);
        x = 0.5 * x * (1.0 + std::tanh(u));
    }
    return make(std::move(out), {a}, [](Node& self) {
        auto& pa = self.parents[0];
        for (std::int64_t i = 0; i < self.grad.numel(); ++i) {
            const double x = pa->value[i];
            const double u = kGeluC * (x + kGeluA * x * x * x);
            const double t = std::tanh(u);
            const double du = kGeluC * (1.0 + 3.0 * kGeluA * x * x);
            const double d = 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
            pa->grad[i] += self.grad[i] * d;
        }
    });
}

Var softmax_rows(const Var& x) {
    const std::int64_t m = x->value.rows(), n = x->value.cols();
    Tensor out = x->value;
    for (std::int64_t i = 0; i < m; ++i) {
        double* row = out.data() + i * n;
        double mx = -std::numeric_limits<double>::infinity();
        for (std::int64_t j = 0; j < n; ++j) mx = std::max(mx, row[j]);
        double s = 0.0;
        for (std::int64_t j = 0; j < n; ++j) {
            row[j] = std::exp(row[j] - mx);
            s += row[j];
        }
        for (std::int64_t j = 0; j < n; ++j) row[j] /= s;
    }
    return make(std::move(out), {x}, [m, n](Node& self) {
        auto& gx = self.parents[0]->grad;
        for (std::int64_t i = 0; i < m; ++i) {
            const double* p = self.value.data() + i * n;
            const double* d = self.grad.data() + i * n;
            double dot = 0.0;
            for (std::int64_t j = 0; j < n; ++j) dot += p[j] * d[j];
            for (std::int64_t j = 0; j < n; ++j)
                gx[i * n + j] += p[j] * (d[j] - dot);
        }
    });
}

Var logsumexp_rows(const Var& x) {
    const std::int64_t m = x->value.rows(), n = x->value.cols();
    Tensor out({m, 1});
    for (std::int64_t i = 0; i < m; ++i) {
        const double* row = x->value.data() + i * n;
        double mx = -std::numeric_limits<double>::infinity();
        for (std::int64_t j = 0; j < n; ++j) mx = std::max(mx, row[j]);
        double s = 0.0;
        for (std::int64_t j = 0; j < n; ++j) s += std::exp(row[j] - mx);
        out[i] = mx + std::log(s);
    }
    return make(std::move(out), {x}, [m, n](Node& self) {
        auto& px = self.parents[0];
        for (std::int64_t i = 0; i < m; ++i) {
            const double lse = self.value[i];
            const double g = self.grad[i];
            for (std::int64_t j = 0; j < n; ++j)
                px->grad[i * n + j] += g * std::exp(px->value[i * n + j] - lse);
        }
    });
}

Var layer_norm_rows(const Var& x, const Var& gamma, const Var& beta, double eps) {
    const std::int64_t m = x->value.rows(), n = x->value.cols();
    if (gamma->value.numel() != n || beta->value.numel() != n)
        throw std::invalid_argument("layer_norm_rows: parameter length mismatch");
    Tensor out({m, n});
    auto xhat = std::make_shared<Tensor>(Tensor({m, n}));
    auto inv_std = std::make_shared<Tensor>(Tensor({m}));
    for (std::int64_t i = 0; i < m; ++i) {
        const double* row = x->value.data() + i * n;
        double mean = 0.0;
        for (std::int64_t j = 0; j < n; ++j) mean += row[j];
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (std::int64_t j = 0; j < n; ++j) var += (row[j] - mean) * (row[j] - mean);
        var /= static_cast<double>(n);
        const double is = 1.0 / std::sqrt(var + eps);
        (*inv_std)[i] = is;
        for (std::int64_t j = 0; j < n; ++j) {
            const double xh = (row[j] - mean) * is;
            (*xhat)[i * n + j] = xh;
            out[i * n + j] = gamma->value[j] * xh + beta->value[j];
        }
    }
    return make(std::move(out), {x, gamma, beta}, [m, n, xhat, inv_std](Node& self) {
        auto& gx = self.parents[0]->grad;
        auto& gg = self.parents[1]->grad;
        auto& gb = self.parents[2]->grad;
        const Tensor& gam = self.parents[1]->value;
        for (std::int64_t i = 0; i < m; ++i) {
            const double* d = self.grad.data() + i * n;
            const double* xh = xhat->data() + i * n;
            double sum_dg = 0.0, sum_dgx = 0.0;
            for (std::int64_t j = 0; j < n; ++j) {
                const double dg = d[j] * gam[j];
                sum_dg += dg;
                sum_dgx += dg * xh[j];
                gg[j] += d[j] * xh[j];
                gb[j] += d[j];
            }
            const double is = (*inv_std)[i];
            const double inv_n = 1.0 / static_cast<double>(n);
            for (std::int64_t j = 0; j < n; ++j) {
                const double dg = d[j] * gam[j];
                gx[i * n + j] += is * (dg - inv_n * sum_dg - xh[j] * inv_n * sum_dgx);
            }
        }
    });
}

Var reshape(const Var& x, std::vector<std::int64_t> shape) {
    Tensor out(std::move(shape), x->value.vec());
    return make(std::move(out), {x}, [](Node& self) {
        auto& gx = self.parents[0]->grad;
        for (std::int64_t i = 0; i < self.grad.numel(); ++i) gx[i] += self.grad[i];
    });
}

Var slice_rows(const Var& x, std::int64_t r0, std::int64_t len) {
    const std::int64_t m = x->value.rows(), n = x->value.cols();
    if (r0 < 0 || len < 0 || r0 + len > m) throw std::invalid_argument("slice_rows: range");
    Tensor out({len, n});
    std::copy_n(x->value.data() + r0 * n, len * n, out.data());
    return make(std::move(out), {x}, [r0, n](Node& self) {
        auto& gx = self.parents[0]->grad;
        for (std::int64_t i = 0; i < self.grad.numel(); ++i)
            gx[r0 * n + i] += self.grad[i];
    });
}

Var slice_cols(const Var& x, std::int64_t c0, std::int64_t len) {
    const std::int64_t m = x->value.rows(), n = x->value.cols();
    if (c0 < 0 || len < 0 || c0 + len > n) throw std::invalid_argument("slice_cols: range");
    Tensor out({m, len});
    for (std::int64_t i = 0; i < m; ++i)
        std::copy_n(x->value.data() + i * n + c0, len, out.data() + i * len);
    return make(std::move(out), {x}, [m, n, c0, len](Node& self) {
        auto& gx = self.parents[0]->grad;
        for (std::int64_t i = 0; i < m; ++i)
            for (std::int64_t j = 0; j < len; ++j)
                gx[i * n + c0 + j] += self.grad[i * len + j];
    });
}

Var concat_rows(const Var& a, const Var& b) {
    const std::int64_t n = a->value.cols();
    if (b->value.cols() != n) throw std::invalid_argument("concat_rows: column mismatch");
    const std::int64_t ma = a->value.rows(), mb = b->value.rows();
    Tensor out({ma + mb, n});
    std::copy_n(a->value.data(), ma * n, out.data());
    std::copy_n(b->value.data(), mb * n, out.data() + ma * n);
    return make(std::move(out), {a, b}, [ma, n](Node& self) {
        auto& ga = self.parents[0]->grad;
        auto& gb = self.parents[1]->grad;
        for (std::int64_t i = 0; i < ga.numel(); ++i) ga[i] += self.grad[i];
        for (std::int64_t i = 0; i < gb.numel(); ++i) gb[i] += self.grad[ma * n + i];
    });
}

Var concat_cols(const Var& a, const Var& b) {
    const std::int64_t m = a->value.rows();
    if (b->value.rows() != m) throw std::invalid_argument("concat_cols: row mismatch");
    const std::int64_t na = a->value.cols(), nb = b->value.cols();
    Tensor out({m, na + nb});
    for (std::int64_t i = 0; i < m; ++i) {
        std::copy_n(a->value.data() + i * na, na, out.data() + i * (na + nb));
        std::copy_n(b->value.data() + i * nb, nb, out.data() + i * (na + nb) + na);
    }
    return make(std::move(out), {a, b}, [m, na, nb](Node& self) {
        auto& ga = self.parents[0]->grad;
        auto& gb = self.parents[1]->grad;
        for (std::int64_t i = 0; i < m; ++i) {
            for (std::int64_t j = 0; j < na; ++j)
                ga[i * na + j] += self.grad[i * (na + nb) + j];
            for (std::int64_t j = 0; j < nb; ++j)
                gb[i * nb + j] += self.grad[i * (na + nb) + na + j];
        }
    });
}

Var gather_rows(const Var& table, std::vector<std::int64_t> idx) {
    const std::int64_t m = table->value.rows(), n = table->value.cols();
    Tensor out({static_cast<std::int64_t>(idx.size()), n});
    for (std::size_t r = 0; r < idx.size(); ++r) {
        if (idx[r] < 0 || idx[r] >= m) throw std::invalid_argument("gather_rows: index out of range");
        std::copy_n(table->value.data() + idx[r] * n, n, out.data() + r * n);
    }
    return make(std::move(out), {table}, [idx = std::move(idx), n](Node& self) {
        auto& gt = self.parents[0]->grad;
        for (std::size_t r = 0; r < idx.size(); ++r)
            for (std::int64_t j = 0; j < n; ++j)
                gt[idx[r] * n + j] += self.grad[static_cast<std::int64_t>(r) * n + j];
    });
}

Var sum_all(const Var& x) {
    double s = 0.0;
    for (double v : x->value.vec()) s += v;
    return make(Tensor::scalar(s), {x}, [](Node& self) {
        auto& gx = self.parents[0]->grad;
        const double g = self.grad[0];
        for (std::int64_t i = 0; i < gx.numel(); ++i) gx[i] += g;
    });
}

Var mean_all(const Var& x) {
    const double inv_n = 1.0 / static_cast<double>(x->value.numel());
    double s = 0.0;
    for (double v : x->value.vec()) s += v;
    return make(Tensor::scalar(s * inv_n), {x}, [inv_n](Node& self) {
        auto& gx = self.parents[0]->grad;
        const double g = self.grad[0] * inv_n;
        for (std::int64_t i = 0; i < gx.numel(); ++i) gx[i] += g;
    });
}

Var sumsq_diff(const Var& a, const Var& b) {
    check_same_shape(a, b, "sumsq_diff");
    double s = 0.0;
    for (std::int64_t i = 0; i < a->value.numel(); ++i) {
        const double d = a->value[i] - b->value[i];
        s += d * d;
    }
    return make(Tensor::scalar(s), {a, b}, [](Node& self) {
        auto& pa = self.parents[0];
        auto& pb = self.parents[1];
        const double g = self.grad[0];
        for (std::int64_t i = 0; i < pa->value.numel(); ++i) {
            const double d = 2.0 * (pa->value[i] - pb->value[i]) * g;
            pa->grad[i] += d;
            pb->grad[i] -= d;
        }
    });
}

Var pairwise_sqdist(const Var& x, const Var& m) {
    const std::int64_t n = x->value.rows(), d = x->value.cols(), k = m->value.rows();
    if (m->value.cols() != d) throw std::invalid_argument("pairwise_sqdist: dim mismatch");
    Tensor out({n, k});
    for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t j = 0; j < k; ++j) {
            double s = 0.0;
            for (std::int64_t p = 0; p < d; ++p) {
                const double diff = x->value[i * d + p] - m->value[j * d + p];
                s += diff * diff;
            }
            out[i * k + j] = s;
        }
    return make(std::move(out), {x, m}, [n, d, k](Node& self) {
        auto& px = self.parents[0];
        auto& pm = self.parents[1];
        for (std::int64_t i = 0; i < n; ++i)
            for (std::int64_t j = 0; j < k; ++j) {
                const double g = 2.0 * self.grad[i * k + j];
                if (g == 0.0) continue;
                for (std::int64_t p = 0; p < d; ++p) {
                    const double diff = px->value[i * d + p] - pm->value[j * d + p];
                    px->grad[i * d + p] += g * diff;
                    pm->grad[j * d + p] -= g * diff;
                }
            }
    });
}

Var prefix_attention(const Var& q, const Var& k, const Var& v,
                     const Var& kpre, const Var& vpre,
                     std::vector<AttnSpan> spans, int n_heads) {
    const std::int64_t rcount = q->value.rows();
    const std::int64_t width = q->value.cols();
    if (k->value.rows() != rcount || v->value.rows() != rcount ||
        k->value.cols() != width || v->value.cols() != width ||
        kpre->value.cols() != width || vpre->value.cols() != width)
        throw std::invalid_argument("prefix_attention: shape mismatch");
    if (static_cast<std::int64_t>(spans.size()) != rcount)
        throw std::invalid_argument("prefix_attention: span count mismatch");
    if (n_heads <= 0 || width % n_heads != 0)
        throw std::invalid_argument("prefix_attention: heads must divide width");
    const std::int64_t pre_rows = kpre->value.rows();
    for (const auto& s : spans)
        if (s.pre_base < 0 || s.pre_len < 0 || s.pre_base + s.pre_len > pre_rows)
            throw std::invalid_argument("prefix_attention: span out of range");

    const std::int64_t dh = width / n_heads;
    const double sc = 1.0 / std::sqrt(static_cast<double>(dh));

    // softmax weights per (row, head), ragged; kept for the reverse pass
    auto probs = std::make_shared<std::vector<double>>();
    auto offsets = std::make_shared<std::vector<std::int64_t>>(rcount * n_heads + 1, 0);
    {
        std::int64_t total = 0;
        for (std::int64_t r = 0; r < rcount; ++r)
            for (int h = 0; h < n_heads; ++h) {
                (*offsets)[r * n_heads + h] = total;
                total += spans[r].pre_len + 1;
            }
        (*offsets)[rcount * n_heads] = total;
        probs->resize(total);
    }

    Tensor out({rcount, width});
    std::vector<double> logits;
    for (std::int64_t r = 0; r < rcount; ++r) {
        const auto& sp = spans[r];
        const std::int64_t len = sp.pre_len + 1;  // prefix plus self
        for (int h = 0; h < n_heads; ++h) {
            const double* qrow = q->value.data() + r * width + h * dh;
            logits.assign(len, 0.0);
            for (std::int64_t j = 0; j < sp.pre_len; ++j) {
                const double* krow = kpre->value.data() + (sp.pre_base + j) * width + h * dh;
                double s = 0.0;
                for (std::int64_t p = 0; p < dh; ++p) s += qrow[p] * krow[p];
                logits[j] = s * sc;
            }
            {
                const double* krow = k->value.data() + r * width + h * dh;
                double s = 0.0;
                for (std::int64_t p = 0; p < dh; ++p) s += qrow[p] * krow[p];
                logits[len - 1] = s * sc;
            }
            double mx = -std::numeric_limits<double>::infinity();
            for (double x : logits) mx = std::max(mx, x);
            double denom = 0.0;
            double* prow = probs->data() + (*offsets)[r * n_heads + h];
            for (std::int64_t j = 0; j < len; ++j) {
                prow[j] = std::exp(logits[j] - mx);
                denom += prow[j];
            }
            for (std::int64_t j = 0; j < len; ++j) prow[j] /= denom;

            double* orow = out.data() + r * width + h * dh;
            for (std::int64_t j = 0; j < sp.pre_len; ++j) {
                const double* vrow = vpre->value.data() + (sp.pre_base + j) * width + h * dh;
                for (std::int64_t p = 0; p < dh; ++p) orow[p] += prow[j] * vrow[p];
            }
            const double* vrow = v->value.data() + r * width + h * dh;
            for (std::int64_t p = 0; p < dh; ++p) orow[p] += prow[len - 1] * vrow[p];
        }
    }

    return make(std::move(out), {q, k, v, kpre, vpre},
                [spans = std::move(spans), n_heads, dh, sc, probs, offsets](Node& self) {
        const std::int64_t width = static_cast<std::int64_t>(n_heads) * dh;
        auto& pq = self.parents[0];
        auto& pk = self.parents[1];
        auto& pv = self.parents[2];
        auto& pkpre = self.parents[3];
        auto& pvpre = self.parents[4];
        const std::int64_t rcount = pq->value.rows();
        std::vector<double> dlogit;
        for (std::int64_t r = 0; r < rcount; ++r) {
            const auto& sp = spans[r];
            const std::int64_t len = sp.pre_len + 1;
            for (int h = 0; h < n_heads; ++h) {
                const double* dout = self.grad.data() + r * width + h * dh;
                const double* prow = probs->data() + (*offsets)[r * n_heads + h];
                const double* qrow = pq->value.data() + r * width + h * dh;
                dlogit.assign(len, 0.0);
                double dot = 0.0;
                for (std::int64_t j = 0; j < len; ++j) {
                    const double* vrow = (j < sp.pre_len)
                        ? pvpre->value.data() + (sp.pre_base + j) * width + h * dh
                        : pv->value.data() + r * width + h * dh;
                    double dp = 0.0;
                    for (std::int64_t p = 0; p < dh; ++p) dp += dout[p] * vrow[p];
                    dlogit[j] = dp;
                    dot += prow[j] * dp;
                }
                for (std::int64_t j = 0; j < len; ++j)
                    dlogit[j] = prow[j] * (dlogit[j] - dot);

                double* gq = pq->grad.data() + r * width + h * dh;
                for (std::int64_t j = 0; j < len; ++j) {
                    const bool self_j = (j == sp.pre_len);
                    const double* krow = self_j
                        ? pk->value.data() + r * width + h * dh
                        : pkpre->value.data() + (sp.pre_base + j) * width + h * dh;
                    double* gk = self_j
                        ? pk->grad.data() + r * width + h * dh
                        : pkpre->grad.data() + (sp.pre_base + j) * width + h * dh;
                    double* gv = self_j
                        ? pv->grad.data() + r * width + h * dh
                        : pvpre->grad.data() + (sp.pre_base + j) * width + h * dh;
                    const double dl = dlogit[j] * sc;
                    for (std::int64_t p = 0; p < dh; ++p) {
                        gq[p] += dl * krow[p];
                        gk[p] += dl * qrow[p];
                        gv[p] += prow[j] * dout[p];
                    }
                }
            }
        }
    });
}

}  // namespace am::ad
