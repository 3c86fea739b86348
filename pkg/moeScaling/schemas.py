"""
Schemas of every JSON document moeScaling reads or writes.
"""
from moeScaling.json_schema import Field, schemaBaseModel
from moeScaling.param import provenanceList, lossLawVariantList, rTermModeList, paramCountModeList


class ModelConfigSchema(schemaBaseModel):
    """Architecture of one MoE Transformer"""
    schema_version = Field(description="Document schema version", field_type="integer", optional=True)
    n_layer = Field(description="Decoder layers", field_type="integer")
    n_head = Field(description="Attention heads", field_type="integer")
    d_hidden = Field(description="Hidden width", field_type="integer")
    d_expert = Field(description="Expert FFN intermediate width", field_type="integer")
    n_experts = Field(description="Total experts per MoE layer", field_type="integer")
    top_k = Field(description="Routed experts per token", field_type="integer")
    n_shared_experts = Field(description="Always-active experts per token", field_type="integer")
    kv_head_ratio = Field(description="Attention heads per KV head", field_type="integer", optional=True)
    n_ctx = Field(description="Context length in tokens", field_type="integer", optional=True)
    n_vocab = Field(description="Vocabulary size", field_type="integer", optional=True)
    use_gqa = Field(description="Grouped-query attention", field_type="boolean", optional=True)
    use_peft = Field(description="Parameter-efficient fine-tuning", field_type="boolean", optional=True)
    use_grad_checkpoint = Field(description="Gradient checkpointing", field_type="boolean", optional=True)


class FlopsBreakdownSchema(schemaBaseModel):
    """Itemized FLOPs, integers encoded as decimal strings"""
    schema_version = Field(description="Document schema version", field_type="integer")
    q_proj = Field(field_type="string")
    kv_proj = Field(field_type="string")
    attn_weight = Field(field_type="string")
    value = Field(field_type="string")
    out_proj = Field(field_type="string")
    attn_total = Field(field_type="string")
    expert = Field(field_type="string")
    layer_forward = Field(field_type="string")
    logits = Field(field_type="string")
    forward_total = Field(field_type="string")
    backward_total = Field(field_type="string")
    training_total = Field(field_type="string")
    per_token = Field(description="Forward FLOPs per token", field_type="number")
    per_token_exact = Field(description="Forward FLOPs per token as numerator/denominator", field_type="string")


class AllocationLawSchema(schemaBaseModel):
    """r* = alpha_r * C^beta_r"""
    alpha_r = Field(description="Coefficient", field_type="number")
    beta_r = Field(description="Exponent", field_type="number")
    provenance = Field(description="Where the pair came from", field_type="string", enum=provenanceList)
    sparsity = Field(description="Sparsity level the law applies to", field_type="number", optional=True)


class ElasticityParamsSchema(schemaBaseModel):
    """Two-term loss model of attention and expert compute"""
    mu_A = Field(field_type="number")
    mu_E = Field(field_type="number")
    gamma_A = Field(field_type="number")
    gamma_E = Field(field_type="number")
    alpha_A = Field(field_type="number")
    alpha_E = Field(field_type="number")


class SparsityLawSchema(schemaBaseModel):
    """alpha_r = alpha_coef (1-S)^alpha_exp, beta_r = beta_coef (1-S)^beta_exp"""
    alpha_coef = Field(field_type="number")
    alpha_exp = Field(field_type="number")
    beta_coef = Field(field_type="number")
    beta_exp = Field(field_type="number")
    provenance = Field(field_type="string", enum=provenanceList)


class LawCoefficientsSchema(schemaBaseModel):
    """Coefficients of one loss law variant; the variant decides which names are required"""
    variant = Field(field_type="string", enum=lossLawVariantList)
    a = Field(field_type="number", optional=True)
    b = Field(field_type="number", optional=True)
    c = Field(field_type="number", optional=True)
    d = Field(field_type="number", optional=True)
    alpha = Field(field_type="number", optional=True)
    beta = Field(field_type="number", optional=True)
    lambda_ = Field(field_type="number", optional=True, key="lambda")
    gamma = Field(field_type="number", optional=True)
    delta = Field(field_type="number", optional=True)
    tau = Field(field_type="number", optional=True)
    r_term_mode = Field(field_type="string", optional=True, enum=rTermModeList)
    param_count = Field(field_type="string", optional=True, enum=paramCountModeList)
    provenance = Field(field_type="string", optional=True, enum=provenanceList)


class LawStoreSchema(schemaBaseModel):
    """Single source of truth for fitted and published coefficients"""
    schema_version = Field(field_type="integer")
    allocation_laws = Field(description="Allocation laws per sparsity", field_type="array", children=AllocationLawSchema)
    sparsity_law = Field(field_type="object", children=SparsityLawSchema)
    loss_law = Field(field_type="object", children=LawCoefficientsSchema, optional=True)
    alt_laws = Field(field_type="array", children=LawCoefficientsSchema, optional=True)


class FitReportSchema(schemaBaseModel):
    """Result of a loss-law fit"""
    schema_version = Field(field_type="integer")
    variant = Field(field_type="string", enum=lossLawVariantList)
    coefficients = Field(field_type="object", children=LawCoefficientsSchema)
    objective = Field(description="Huber objective at the coefficients", field_type="number")
    huber_delta = Field(field_type="number")
    seed = Field(field_type="integer")
    starts_attempted = Field(field_type="integer")
    starts_converged = Field(field_type="integer")
    n_records = Field(field_type="integer")
    residuals = Field(description="log(predicted) - log(observed) per fitted record", field_type="array", array_type="number")
    in_sample_rmse = Field(field_type="number")
    holdout_sparsity = Field(field_type="number", optional=True)
    heldout_rmse = Field(field_type="number", optional=True)
    n_heldout = Field(field_type="integer", optional=True)


class PlanResultSchema(schemaBaseModel):
    """Architecture recommended for a compute budget"""
    schema_version = Field(field_type="integer")
    feasible = Field(field_type="boolean")
    r_target = Field(field_type="number")
    r_realized = Field(field_type="number")
    ratio_error = Field(field_type="number")
    per_token_target = Field(field_type="number")
    per_token_flops = Field(field_type="number")
    budget_error = Field(field_type="number")
    config = Field(field_type="object", children=ModelConfigSchema)
    flops = Field(field_type="object", children=FlopsBreakdownSchema)
    n_params = Field(field_type="integer")
    n_active_params = Field(field_type="integer")
    predicted_loss = Field(field_type="number", optional=True)
