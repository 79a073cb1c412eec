#pragma once

// k-pooled, l2-Laplace-obfuscated embedding transmission toolkit:
// deterministic synthetic embeddings, block-mean pooling, metric-DP noise,
// unified budget accounting, an inversion-attack harness and the binary
// wire protocol that carries only obfuscated embeddings.

#include "ppft/attack.hpp"
#include "ppft/budget.hpp"
#include "ppft/corpus.hpp"
#include "ppft/error.hpp"
#include "ppft/matrix.hpp"
#include "ppft/metrics.hpp"
#include "ppft/net.hpp"
#include "ppft/noise.hpp"
#include "ppft/pooling.hpp"
#include "ppft/rng.hpp"
#include "ppft/text.hpp"
#include "ppft/verify.hpp"
#include "ppft/vocab.hpp"
#include "ppft/wire.hpp"
