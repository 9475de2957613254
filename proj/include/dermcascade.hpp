#ifndef DERMCASCADE_HPP
#define DERMCASCADE_HPP

#include "dermcascade/anonymizer.hpp"
#include "dermcascade/cascade.hpp"
#include "dermcascade/classifier.hpp"
#include "dermcascade/corpus.hpp"
#include "dermcascade/error.hpp"
#include "dermcascade/featurizer.hpp"
#include "dermcascade/linear_model.hpp"
#include "dermcascade/metrics.hpp"
#include "dermcascade/ontology.hpp"
#include "dermcascade/pipeline.hpp"
#include "dermcascade/review.hpp"
#include "dermcascade/review_service.hpp"
#include "dermcascade/rng.hpp"
#include "dermcascade/synthetic.hpp"
#include "dermcascade/text.hpp"

#endif
