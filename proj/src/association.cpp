#include "instrans/association.hpp"

#include <stdexcept>

#include "instrans/errors.hpp"

namespace instrans {

bool association_allowed(Granularity style_g, Granularity content_g) {
  return coarseness(style_g) <= coarseness(content_g);
}

BatchItem make_batch_item(const ImageSample& sample, int instance_size, int max_crops) {
  BatchItem item;
  item.full = sample;
  item.half = half_scale(sample);
  item.background = background_masked(sample);
  item.crops = crop_instances(sample, instance_size);
  if (static_cast<int>(item.crops.size()) > max_crops) item.crops.resize(static_cast<size_t>(max_crops));
  return item;
}

StyleBank build_style_bank(const TranslationModel& model, const TrainBatch& batch) {
  StyleBank bank;
  for (int d = 0; d < 2; ++d) {
    for (const BatchItem& item : batch.domains[static_cast<size_t>(d)].items) {
      auto style_of = [&](const ImageSample& im, Granularity g) {
        StyleCode s;
        s.vector = encode_style(model, ad::constant(im.pixels), d)->value;
        s.granularity = g;
        s.domain = DomainId{im.domain.name, d};
        if (!s.vector.all_finite()) throw NumericError("style encoder produced non-finite codes");
        return s;
      };
      bank.entries[{d, Granularity::global, item.full.id}] = style_of(item.full, Granularity::global);
      bank.entries[{d, Granularity::background, item.full.id}] = style_of(item.background, Granularity::background);
      for (const ImageSample& crop : item.crops)
        bank.entries[{d, Granularity::instance, crop.id}] = style_of(crop, Granularity::instance);
    }
  }
  return bank;
}

StyleBank bank_keys(const TrainBatch& batch) {
  StyleBank bank;
  for (int d = 0; d < 2; ++d) {
    for (const BatchItem& item : batch.domains[static_cast<size_t>(d)].items) {
      auto tag = [&](Granularity g) {
        StyleCode s;
        s.granularity = g;
        s.domain = DomainId{item.full.domain.name, d};
        return s;
      };
      bank.entries[{d, Granularity::global, item.full.id}] = tag(Granularity::global);
      bank.entries[{d, Granularity::background, item.full.id}] = tag(Granularity::background);
      for (const ImageSample& crop : item.crops)
        bank.entries[{d, Granularity::instance, crop.id}] = tag(Granularity::instance);
    }
  }
  return bank;
}

Granularity StyleRef::granularity() const {
  switch (source) {
    case Source::bank: return key.granularity;
    case Source::prior: return Granularity::global;
    case Source::scale: return Granularity::half_scale;
  }
  return Granularity::global;
}

int CyclePlan::count(StepKind k) const {
  int n = 0;
  for (const auto& s : steps)
    if (s.kind == k) ++n;
  return n;
}

namespace {

class PlanBuilder {
 public:
  PlanBuilder(const StyleBank& bank, const TrainBatch& batch, Rng& rng) : bank_(bank), batch_(batch), rng_(rng) {}

  int add(PlanStep step) {
    if (!association_allowed(step.style.granularity(), step.content.granularity))
      throw std::logic_error("plan step applies a " + granularity_name(step.style.granularity()) +
                             " style to " + granularity_name(step.content.granularity) + " content");
    plan_.steps.push_back(std::move(step));
    return static_cast<int>(plan_.steps.size()) - 1;
  }

  // Uniform pick among the decode domain's bank entries at the given
  // granularities plus one fresh prior sample.
  StyleRef sample_style(int decode_domain, std::initializer_list<Granularity> from) {
    std::vector<StyleRef> candidates;
    for (const auto& [key, code] : bank_.entries) {
      if (key.domain != decode_domain) continue;
      for (Granularity g : from)
        if (key.granularity == g) candidates.push_back(bank_ref(key));
    }
    StyleRef prior;
    prior.source = StyleRef::Source::prior;
    prior.domain = decode_domain;
    prior.prior_seed = rng_.next_u64();
    candidates.push_back(prior);
    return candidates[static_cast<size_t>(rng_.uniform_int(0, static_cast<int64_t>(candidates.size()) - 1))];
  }

  StyleRef bank_ref(const BankKey& key) const {
    StyleRef r;
    r.source = StyleRef::Source::bank;
    r.key = key;
    r.domain = key.domain;
    return r;
  }

  StyleRef global_style_of(int domain, const std::string& id) const {
    return bank_ref({domain, Granularity::global, id});
  }

  int random_item(int domain) {
    const auto& items = batch_.domains[static_cast<size_t>(domain)].items;
    return static_cast<int>(rng_.uniform_int(0, static_cast<int64_t>(items.size()) - 1));
  }

  const StyleBank& bank_;
  const TrainBatch& batch_;
  Rng& rng_;
  CyclePlan plan_;
};

}  // namespace

CyclePlan plan_cycles(const StyleBank& bank, const TrainBatch& batch, const PlanFlags& flags, Rng& rng) {
  PlanBuilder b(bank, batch, rng);

  for (int d = 0; d < 2; ++d) {
    const auto& items = batch.domains[static_cast<size_t>(d)].items;
    for (int i = 0; i < static_cast<int>(items.size()); ++i) {
      const BatchItem& item = items[static_cast<size_t>(i)];

      // self-reconstruction, global and per-instance
      b.add({StepKind::self_recon,
             {d, i, Granularity::global},
             b.global_style_of(d, item.full.id),
             d,
             Granularity::global});
      for (int ci = 0; ci < static_cast<int>(item.crops.size()); ++ci)
        b.add({StepKind::self_recon,
               {d, i, Granularity::instance, ci},
               b.bank_ref({d, Granularity::instance, item.crops[static_cast<size_t>(ci)].id}),
               d,
               Granularity::instance});

      // style exchange between the two scales of the same image
      if (flags.multi_scale) {
        b.add({StepKind::scale_recon,
               {d, i, Granularity::half_scale},
               b.global_style_of(d, item.full.id),
               d,
               Granularity::half_scale});
        StyleRef half_style;
        half_style.source = StyleRef::Source::scale;
        half_style.domain = d;
        half_style.item = i;
        b.add({StepKind::scale_recon, {d, i, Granularity::global}, half_style, d, Granularity::global});
      }

      // coarse style onto fine content within the domain, with a back step
      if (flags.cross_granularity) {
        for (int ci = 0; ci < static_cast<int>(item.crops.size()); ++ci) {
          const std::string& crop_id = item.crops[static_cast<size_t>(ci)].id;
          const auto add_pair = [&](const StyleRef& style) {
            const int fwd = b.add(
                {StepKind::cross_granularity, {d, i, Granularity::instance, ci}, style, d, Granularity::instance});
            const int back = b.add({StepKind::cycle_back,
                                    {d, i, Granularity::instance, ci},
                                    b.bank_ref({d, Granularity::instance, crop_id}),
                                    d,
                                    Granularity::instance,
                                    fwd});
            b.plan_.steps[static_cast<size_t>(fwd)].pair_index = back;
          };
          const int donor = b.random_item(d);
          add_pair(b.global_style_of(d, items[static_cast<size_t>(donor)].full.id));
          add_pair(b.bank_ref({d, Granularity::background, items[static_cast<size_t>(donor)].full.id}));
        }
      }

      // domain swap at both granularities, each with a back step
      const int other = 1 - d;
      if (flags.cross_domain && !batch.domains[static_cast<size_t>(other)].items.empty()) {
        const int fwd = b.add({StepKind::cross_domain,
                               {d, i, Granularity::global},
                               b.sample_style(other, {Granularity::global}),
                               other,
                               Granularity::global});
        const int back = b.add({StepKind::cycle_back,
                                {d, i, Granularity::global},
                                b.global_style_of(d, item.full.id),
                                d,
                                Granularity::global,
                                fwd});
        b.plan_.steps[static_cast<size_t>(fwd)].pair_index = back;

        for (int ci = 0; ci < static_cast<int>(item.crops.size()); ++ci) {
          const std::string& crop_id = item.crops[static_cast<size_t>(ci)].id;
          const int ofwd = b.add(
              {StepKind::cross_domain,
               {d, i, Granularity::instance, ci},
               b.sample_style(other, {Granularity::global, Granularity::background, Granularity::instance}),
               other,
               Granularity::instance});
          const int oback = b.add({StepKind::cycle_back,
                                   {d, i, Granularity::instance, ci},
                                   b.bank_ref({d, Granularity::instance, crop_id}),
                                   d,
                                   Granularity::instance,
                                   ofwd});
          b.plan_.steps[static_cast<size_t>(ofwd)].pair_index = oback;
        }
      }
    }
  }

  validate_plan(b.plan_);
  return b.plan_;
}

void validate_plan(const CyclePlan& plan) {
  for (size_t i = 0; i < plan.steps.size(); ++i) {
    const PlanStep& s = plan.steps[i];
    if (!association_allowed(s.style.granularity(), s.content.granularity))
      throw std::logic_error("step " + std::to_string(i) + " violates the association rule");
    const bool is_cycle = s.kind == StepKind::cross_granularity || s.kind == StepKind::cross_domain ||
                          s.kind == StepKind::cycle_back;
    if (is_cycle) {
      if (s.pair_index < 0 || s.pair_index >= static_cast<int>(plan.steps.size()))
        throw std::logic_error("step " + std::to_string(i) + " has no cycle partner");
      const PlanStep& p = plan.steps[static_cast<size_t>(s.pair_index)];
      if (p.pair_index != static_cast<int>(i))
        throw std::logic_error("cycle pairing is not mutual at step " + std::to_string(i));
      if (s.kind == StepKind::cycle_back) {
        if (p.kind != StepKind::cross_granularity && p.kind != StepKind::cross_domain)
          throw std::logic_error("back step " + std::to_string(i) + " pairs with a non-translation");
        if (s.decode_domain != p.content.domain)
          throw std::logic_error("back step " + std::to_string(i) + " does not restore the source domain");
      }
    } else if (s.pair_index != -1) {
      throw std::logic_error("non-cycle step " + std::to_string(i) + " carries a pair index");
    }
    if (s.kind == StepKind::self_recon || s.kind == StepKind::scale_recon) {
      if (s.decode_domain != s.content.domain)
        throw std::logic_error("reconstruction step " + std::to_string(i) + " crosses domains");
    }
  }
}

}  // namespace instrans
