#include "lab/gaussian.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace lab {

CovarianceModel CovarianceModel::from_matrix(const Matrix& k) {
    if (k.rows() != k.cols()) throw DimensionError("covariance must be square");
    if (!k.all_finite()) throw DomainError("covariance must be finite");
    if (asymmetry(k) > 1e-9 * std::max(1.0, k.max_abs()))
        throw DomainError("covariance must be symmetric");
    CovarianceModel m;
    m.d = k.rows();
    m.k_y = symmetrized(k);
    m.eig = sym_eig(m.k_y);
    if (!m.eig.eigenvalues.empty() && m.eig.eigenvalues.back() < -1e-8)
        throw DomainError("covariance must be positive semidefinite");
    return m;
}

CovarianceModel generate_covariance(int d, RngStream rng) {
    if (d < 2) throw DomainError("generate_covariance requires d >= 2");
    Matrix a(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) a(i, j) = rng.normal();
    std::vector<double> s2(d);
    for (int i = 0; i < d; ++i) s2[i] = rng.uniform_range(0.0, 10.0);

    Matrix k = a * Matrix::diag(s2) * a.transposed();
    k = symmetrized(k);
    const double norm = frobenius_norm(k);
    k *= 1.0 / norm;
    return CovarianceModel::from_matrix(k);
}

SampleSet sample_gaussian(const CovarianceModel& cov, long n, RngStream rng) {
    if (n < 1) throw DomainError("sample count must be >= 1");
    const int d = cov.d;
    const Matrix l = cholesky_factor(cov.k_y);

    SampleSet out;
    out.n = n;
    out.dim = d;
    out.seed = rng.seed();
    out.samples = Matrix(static_cast<int>(n), d);
    std::vector<double> z(d);
    for (long i = 0; i < n; ++i) {
        for (int j = 0; j < d; ++j) z[j] = rng.normal();
        double* row = out.samples.data() + static_cast<std::size_t>(i) * d;
        for (int j = 0; j < d; ++j) {
            double acc = 0.0;
            for (int k = 0; k <= j; ++k) acc += l(j, k) * z[k];
            row[j] = acc;
        }
    }
    return out;
}

SampleSet sample_latent(int r, long n, RngStream rng) {
    if (r < 1) throw DomainError("latent dimension must be >= 1");
    if (n < 1) throw DomainError("sample count must be >= 1");
    SampleSet out;
    out.n = n;
    out.dim = r;
    out.seed = rng.seed();
    out.samples = Matrix(static_cast<int>(n), r);
    for (long i = 0; i < n; ++i) {
        double* row = out.samples.data() + static_cast<std::size_t>(i) * r;
        for (int j = 0; j < r; ++j) row[j] = rng.normal();
    }
    return out;
}

Matrix empirical_covariance(const SampleSet& s) {
    if (s.n < 1) throw DomainError("empirical_covariance needs at least one sample");
    const int d = s.dim;
    Matrix c(d, d);
    for (long i = 0; i < s.n; ++i) {
        const double* row = s.samples.data() + static_cast<std::size_t>(i) * d;
        for (int a = 0; a < d; ++a)
            for (int b = a; b < d; ++b) c(a, b) += row[a] * row[b];
    }
    const double inv_n = 1.0 / static_cast<double>(s.n);
    for (int a = 0; a < d; ++a)
        for (int b = a; b < d; ++b) {
            c(a, b) *= inv_n;
            c(b, a) = c(a, b);
        }
    return c;
}

namespace {

std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

}  // namespace

std::string samples_to_csv(const SampleSet& s) {
    std::string out;
    out.reserve(static_cast<std::size_t>(s.n) * s.dim * 20 + 64);
    char header[96];
    std::snprintf(header, sizeof(header), "dim=%d,n=%ld,seed=%" PRIu64 "\n", s.dim, s.n, s.seed);
    out += header;
    for (long i = 0; i < s.n; ++i) {
        for (int j = 0; j < s.dim; ++j) {
            if (j > 0) out += ',';
            out += format_double(s.samples(static_cast<int>(i), j));
        }
        out += '\n';
    }
    return out;
}

SampleSet samples_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string header;
    if (!std::getline(in, header)) throw IoError("sample CSV: missing header");
    SampleSet s;
    if (std::sscanf(header.c_str(), "dim=%d,n=%ld,seed=%" SCNu64, &s.dim, &s.n, &s.seed) != 3)
        throw IoError("sample CSV: malformed header: " + header);
    if (s.dim < 1 || s.n < 1) throw IoError("sample CSV: invalid dimensions in header");
    s.samples = Matrix(static_cast<int>(s.n), s.dim);
    std::string line;
    for (long i = 0; i < s.n; ++i) {
        if (!std::getline(in, line)) throw IoError("sample CSV: truncated body");
        std::istringstream row(line);
        std::string cell;
        for (int j = 0; j < s.dim; ++j) {
            if (!std::getline(row, cell, ',')) throw IoError("sample CSV: short row");
            s.samples(static_cast<int>(i), j) = std::strtod(cell.c_str(), nullptr);
        }
    }
    return s;
}

void write_samples_csv(const SampleSet& s, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    const std::string text = samples_to_csv(s);
    f.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!f) throw IoError("write failed: " + path);
}

SampleSet read_samples_csv(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for reading: " + path);
    std::ostringstream buf;
    buf << f.rdbuf();
    return samples_from_csv(buf.str());
}

}  // namespace lab
