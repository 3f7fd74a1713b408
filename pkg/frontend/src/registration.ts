// Subscriber registration: client -> preference -> subscription, in
// that order, so a validation failure leaves nothing behind.

import { ApiClient, ApiError, Constraint } from "./api.js";

export interface RegistrationInput {
  name: string;
  mobile: string;
  category: string;
  constraints: Constraint[];
}

export interface RegistrationResult {
  clientId: number;
  preferenceId: number;
}

// Same rule the API enforces: digits with an optional leading '+'.
export function mobileValid(mobile: string): boolean {
  return /^\+?[0-9]+$/.test(mobile);
}

export async function registrationFlow(
  api: ApiClient,
  input: RegistrationInput,
): Promise<RegistrationResult> {
  if (!input.name.trim()) {
    throw new ApiError(422, "validation", "name must not be empty");
  }
  if (!mobileValid(input.mobile)) {
    // rejected locally with the API's own rule; no request is made
    throw new ApiError(422, "validation", `bad mobile number '${input.mobile}'`);
  }
  if (input.constraints.length === 0) {
    throw new ApiError(422, "validation", "add at least one constraint");
  }
  const client = await api.createClient(input.name, input.mobile);
  const preference = await api.createPreference(input.category, input.constraints);
  await api.subscribe(client.id, preference.id);
  return { clientId: client.id, preferenceId: preference.id };
}
